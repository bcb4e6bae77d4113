#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "desk_songs.hpp"
#include "mira/audio_io.hpp"
#include "mira/evaluator.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using namespace mira;
using mira::support::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_songs(const fs::path& dir, const std::string& prefix, int count, std::uint64_t seed) {
  fs::create_directories(dir);
  support::DeskSongOptions o;
  o.seconds = 3.0;
  o.sample_rate = 22050;
  for (const auto& clip : support::desk_songs(prefix, count, seed, o)) save_wav(clip, dir / (clip.id + ".wav"));
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

class CliFlow : public ::testing::Test {
 protected:
  void SetUp() override {
    write_songs(dir / "refs", "ref", 3, 1);
    write_songs(dir / "mix", "mix", 3, 2);
  }
  Outcome synth(const std::string& out, const std::string& seed = "5") {
    return run({"synth", "--reference", (dir / "refs").string(), "--mixture", (dir / "mix").string(), "--degrees",
                "10,50", "--replicas", "2", "--seed", seed, "--sample-rate", "22050", "--out", (dir / out).string()});
  }
  TempDir dir;
};

}  // namespace

TEST(Cli, HelpAndParseErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"--version"}).code, 0);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"eval", "--reference", "a.json"}).code, 2);
  EXPECT_EQ(run({"eval", "--reference", "a", "--target", "b", "--metrics", "coverid", "--out", "o", "--bogus"}).code, 2);
}

TEST_F(CliFlow, SynthWritesCorpusAndManifests) {
  const Outcome r = synth("corpus");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("12 replicas"), std::string::npos);
  const fs::path c = dir / "corpus";
  for (const char* f : {"corpus.json", "reference_set.json", "replica_set.json"}) EXPECT_TRUE(fs::exists(c / f)) << f;
  std::size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(c / "replicas")) wavs += e.path().extension() == ".wav";
  EXPECT_EQ(wavs, 12u);
  const auto doc = nlohmann::json::parse(std::ifstream(c / "corpus.json"));
  EXPECT_EQ(doc["specs"].size(), 12u);
  EXPECT_EQ(doc["replicas_per_song"], 2);
  EXPECT_EQ(load_wav(c / "replicas" / "ref00_p50_r1.wav", 22050).samples.size(), 3 * 22050);

  ASSERT_EQ(synth("again").code, 0);
  for (const auto& e : fs::directory_iterator(c / "replicas")) {
    std::ifstream a(e.path(), std::ios::binary), b(dir / "again" / "replicas" / e.path().filename(), std::ios::binary);
    EXPECT_TRUE(std::equal(std::istreambuf_iterator<char>(a), {}, std::istreambuf_iterator<char>(b))) << e.path();
  }
}

TEST_F(CliFlow, SynthRejectsBadDegrees) {
  const Outcome r = run({"synth", "--reference", (dir / "refs").string(), "--mixture", (dir / "mix").string(), "--degrees",
                     "0,150", "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run({"synth", "--reference", (dir / "none").string(), "--mixture", (dir / "mix").string(), "--out",
                 (dir / "o").string()})
                .code,
            2);
}

TEST_F(CliFlow, StatsThenReport) {
  ASSERT_EQ(synth("corpus").code, 0);
  const Outcome s = run({"stats", "--corpus", (dir / "corpus" / "corpus.json").string(), "--metrics", "builtin_cos,kl,fad",
                     "--bind", "kl=builtin", "--bind", "fad=builtin", "--sample-rate", "22050", "--out",
                     (dir / "stats").string()});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("kruskal-wallis"), std::string::npos);
  const auto rep = read_report(dir / "stats" / "report.json");
  ASSERT_TRUE(rep.stats.has_value());
  EXPECT_EQ(rep.stats->degrees, (std::vector<double>{0.1, 0.5}));
  // 3*2 baseline plus 3*2 per degree, for two per-pair metrics.
  EXPECT_EQ(rep.per_pair.size(), 2u * (6 + 6 + 6));
  EXPECT_EQ(count_lines(dir / "stats" / "pairs.csv"), rep.per_pair.size() + 1);
  EXPECT_TRUE(fs::exists(dir / "stats" / "trend_builtin_cos.svg"));
  EXPECT_TRUE(fs::exists(dir / "stats" / "trend_fad.svg"));

  const Outcome r = run({"report", "--in", (dir / "stats").string(), "--out", (dir / "again").string(), "--formats", "json,csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_report(dir / "again" / "report.json"), rep);
  EXPECT_FALSE(fs::exists(dir / "again" / "trend_kl.svg"));
  EXPECT_EQ(run({"report", "--in", (dir / "stats").string(), "--formats", "pdf"}).code, 2);
}

TEST_F(CliFlow, EvalExitCodes) {
  ASSERT_EQ(synth("corpus").code, 0);
  const std::string refs = (dir / "corpus" / "reference_set.json").string();
  const std::string reps = (dir / "corpus" / "replica_set.json").string();
  const Outcome ok = run({"eval", "--reference", refs, "--target", reps, "--metrics", "coverid,builtin_cos", "--threshold",
                      "coverid=1e9", "--sample-rate", "22050", "--out", (dir / "eval").string()});
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("36 pair(s) flagged"), std::string::npos) << ok.out;
  EXPECT_EQ(count_lines(dir / "eval" / "pairs.csv"), 2u * 3 * 12 + 1);

  EXPECT_EQ(run({"eval", "--reference", refs, "--target", reps, "--metrics", "clap_cos", "--out", (dir / "x").string()}).code, 2);
  EXPECT_EQ(run({"eval", "--reference", refs, "--target", reps, "--metrics", "coverid", "--threshold", "coverid", "--out",
                 (dir / "x").string()})
                .code,
            2);
  EXPECT_EQ(run({"eval", "--reference", (dir / "missing.json").string(), "--target", reps, "--metrics", "coverid",
                 "--out", (dir / "x").string()})
                .code,
            2);

  fs::create_directories(dir / "junk");
  for (int i = 0; i < 3; ++i) std::ofstream(dir / "junk" / ("j" + std::to_string(i) + ".wav")) << "garbage";
  TrackSet junk{"junk", {}};
  for (int i = 0; i < 3; ++i) {
    Track t;
    t.id = "j" + std::to_string(i);
    t.audio = dir / "junk" / (t.id + ".wav");
    junk.tracks.push_back(t);
  }
  write_track_set(junk, dir / "junk.json");
  const Outcome aborted = run({"eval", "--reference", refs, "--target", (dir / "junk.json").string(), "--metrics",
                           "builtin_cos", "--sample-rate", "22050", "--out", (dir / "x").string()});
  EXPECT_EQ(aborted.code, 4) << aborted.err;

  std::ofstream(dir / "corpus" / "replicas" / "ref00_p10_r0.wav") << "truncated";
  const Outcome data = run({"synth", "--reference", (dir / "corpus" / "replicas").string(), "--mixture",
                        (dir / "mix").string(), "--out", (dir / "y").string()});
  EXPECT_EQ(data.code, 3) << data.err;
}
