#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <set>

#include "desk_songs.hpp"
#include "mira/error.hpp"
#include "mira/replication.hpp"

using namespace mira;

namespace {

AudioClip ramp(const std::string& id, double seconds, float offset, int rate = 44100) {
  AudioClip c;
  c.id = id;
  c.sample_rate = rate;
  c.samples.resize(static_cast<Eigen::Index>(std::llround(seconds * rate)));
  for (Eigen::Index i = 0; i < c.samples.size(); ++i) c.samples[i] = offset + 1e-6f * static_cast<float>(i % 100000);
  return c;
}

std::vector<AudioClip> noise_clips(const std::string& prefix, int count, double seconds, unsigned seed) {
  std::vector<AudioClip> out;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-0.5f, 0.5f);
  for (int i = 0; i < count; ++i) {
    AudioClip c;
    c.id = prefix + std::to_string(i);
    c.sample_rate = 8000;
    c.samples.resize(static_cast<Eigen::Index>(seconds * 8000));
    for (Eigen::Index k = 0; k < c.samples.size(); ++k) c.samples[k] = u(rng);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

TEST(MakeReplica, SegmentLengthsMatchDurations) {
  const AudioClip ref = ramp("r", 30.0, 0.0f);
  const AudioClip mix = ramp("m", 30.0, 0.5f);
  std::mt19937_64 rng(1);
  const auto [five, s5] = make_replica(ref, mix, 0.05, rng);
  EXPECT_EQ(s5.length, 66150);  // 1.5 s
  EXPECT_NEAR(static_cast<double>(s5.length) / 44100, 1.5, 1e-12);
  const auto [half, s50] = make_replica(ref, mix, 0.5, rng);
  EXPECT_NEAR(static_cast<double>(s50.length) / 44100, 15.0, 1e-12);
  EXPECT_EQ(five.samples.size(), mix.samples.size());
}

TEST(MakeReplica, SpliceIsExactAndLocal) {
  const auto refs = noise_clips("r", 1, 30.0, 2);
  const auto mixes = noise_clips("m", 1, 25.0, 3);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const double p = std::array{0.05, 0.1, 0.15, 0.25, 0.5}[seed % 5];
    const auto [out, spec] = make_replica(refs[0], mixes[0], p, rng);
    ASSERT_EQ(out.samples.size(), mixes[0].samples.size());
    EXPECT_GE(spec.copy_start, 0);
    EXPECT_GE(spec.insert_at, 0);
    EXPECT_LE(spec.copy_start + spec.length, refs[0].samples.size());
    EXPECT_LE(spec.insert_at + spec.length, mixes[0].samples.size());
    EXPECT_NEAR(spec.length / 8000.0, p * refs[0].duration_seconds(), 1e-3);
    EXPECT_EQ(out.samples.segment(spec.insert_at, spec.length), refs[0].samples.segment(spec.copy_start, spec.length));
    EXPECT_EQ(out.samples.head(spec.insert_at), mixes[0].samples.head(spec.insert_at));
    const auto tail = mixes[0].samples.size() - spec.insert_at - spec.length;
    EXPECT_EQ(out.samples.tail(tail), mixes[0].samples.tail(tail));
  }
}

TEST(MakeReplica, OffsetsCoverTheValidRange) {
  const auto refs = noise_clips("r", 1, 10.0, 4);
  const auto mixes = noise_clips("m", 1, 10.0, 5);
  std::int64_t lo = INT64_MAX, hi = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    std::mt19937_64 rng(seed);
    const auto spec = make_replica(refs[0], mixes[0], 0.5, rng).second;
    lo = std::min(lo, spec.insert_at);
    hi = std::max(hi, spec.insert_at);
  }
  EXPECT_LT(lo, 40000 / 10);
  EXPECT_GT(hi, 40000 - 40000 / 10);
}

TEST(MakeReplica, Errors) {
  const AudioClip ref = ramp("r", 2.0, 0.0f, 8000);
  const AudioClip mix = ramp("m", 2.0, 0.0f, 8000);
  const AudioClip short_mix = ramp("s", 0.5, 0.0f, 8000);
  const AudioClip other_rate = ramp("o", 2.0, 0.0f, 16000);
  std::mt19937_64 rng(1);
  for (double p : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    EXPECT_THROW(make_replica(ref, mix, p, rng), InvalidProportionError);
  }
  EXPECT_THROW(make_replica(ref, short_mix, 0.5, rng), InvalidProportionError);
  EXPECT_THROW(make_replica(ref, other_rate, 0.5, rng), RateError);
}

TEST(MakeReplica, CrossfadeTouchesOnlyTheEdges) {
  const auto refs = noise_clips("r", 1, 4.0, 6);
  const auto mixes = noise_clips("m", 1, 4.0, 7);
  std::mt19937_64 a(9), b(9);
  const auto [hard, spec] = make_replica(refs[0], mixes[0], 0.25, a);
  const auto [soft, spec2] = make_replica(refs[0], mixes[0], 0.25, b, ReplicaOptions{10.0});
  ASSERT_EQ(spec, spec2);
  const std::int64_t fade = 80;
  EXPECT_EQ(soft.samples.segment(spec.insert_at + fade, spec.length - 2 * fade),
            hard.samples.segment(spec.insert_at + fade, spec.length - 2 * fade));
  EXPECT_NE(soft.samples.segment(spec.insert_at, fade), hard.samples.segment(spec.insert_at, fade));
}

TEST(RenderReplica, ReproducesMakeReplica) {
  const auto refs = noise_clips("r", 1, 6.0, 8);
  const auto mixes = noise_clips("m", 1, 6.0, 9);
  std::mt19937_64 rng(10);
  auto [clip, spec] = make_replica(refs[0], mixes[0], 0.15, rng);
  spec.replica_id = "x";
  EXPECT_EQ(render_replica(spec, refs[0], mixes[0]).samples, clip.samples);
  spec.insert_at = mixes[0].samples.size();
  EXPECT_THROW(render_replica(spec, refs[0], mixes[0]), InvalidInputError);
}

TEST(ReplicaName, Format) {
  EXPECT_EQ(replica_name("ref", 0.05, 3), "ref_p05_r3");
  EXPECT_EQ(replica_name("ref", 0.5, 0), "ref_p50_r0");
  EXPECT_EQ(replica_name("ref", 0.025, 1), "ref_p2.5_r1");
}

TEST(BuildCorpus, CountsAndSpecs) {
  const auto refs = noise_clips("r", 2, 2.0, 11);
  const auto mixes = noise_clips("m", 3, 2.0, 12);
  const Corpus c = build_corpus(refs, mixes, {0.1}, 3, 5, "rock");
  EXPECT_EQ(c.replicas.size(), 6u);
  EXPECT_EQ(c.manifest.specs.size(), 6u);
  EXPECT_EQ(c.manifest.genre, "rock");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < c.replicas.size(); ++i) {
    const auto& s = c.manifest.specs[i];
    ids.insert(s.replica_id);
    EXPECT_EQ(c.replicas[i].id, s.replica_id);
    EXPECT_DOUBLE_EQ(s.proportion, 0.1);
    const auto mix = std::find_if(mixes.begin(), mixes.end(), [&](const AudioClip& m) { return m.id == s.mixture_id; });
    ASSERT_NE(mix, mixes.end());
    const auto ref = std::find_if(refs.begin(), refs.end(), [&](const AudioClip& r) { return r.id == s.reference_id; });
    EXPECT_EQ(render_replica(s, *ref, *mix).samples, c.replicas[i].samples);
  }
  EXPECT_EQ(ids.size(), 6u);
}

TEST(BuildCorpus, FourHundredSongScaleCounts) {
  std::vector<AudioClip> refs(400);
  for (int i = 0; i < 400; ++i) {
    refs[static_cast<std::size_t>(i)].id = "s" + std::to_string(i);
    refs[static_cast<std::size_t>(i)].samples = Eigen::VectorXf::Zero(100);
  }
  std::size_t calls = 0;
  std::map<double, int> per_degree;
  std::mutex m;
  const auto manifest = build_corpus_streaming(refs, refs, {0.05, 0.1, 0.15, 0.25, 0.5}, 10, 1,
                                               [&](std::size_t, AudioClip&&, const ReplicationSpec& s) {
                                                 std::lock_guard lock(m);
                                                 ++calls;
                                                 ++per_degree[s.proportion];
                                               });
  EXPECT_EQ(calls, 20000u);
  EXPECT_EQ(manifest.specs.size(), 20000u);
  for (const auto& [d, n] : per_degree) EXPECT_EQ(n, 4000) << d;
}

TEST(BuildCorpus, DeterministicAcrossRunsAndWorkers) {
  const auto refs = noise_clips("r", 3, 1.0, 13);
  const auto mixes = noise_clips("m", 4, 1.0, 14);
  const Corpus a = build_corpus(refs, mixes, {0.05, 0.5}, 2, 77, "g", {}, 1);
  const Corpus b = build_corpus(refs, mixes, {0.05, 0.5}, 2, 77, "g", {}, 4);
  EXPECT_EQ(a.manifest, b.manifest);
  for (std::size_t i = 0; i < a.replicas.size(); ++i) EXPECT_EQ(a.replicas[i].samples, b.replicas[i].samples);
  const Corpus c = build_corpus(refs, mixes, {0.05, 0.5}, 2, 78, "g");
  EXPECT_NE(a.manifest, c.manifest);
}

TEST(BuildCorpus, RejectsEmptyInputs) {
  const auto refs = noise_clips("r", 1, 1.0, 15);
  EXPECT_THROW(build_corpus({}, refs, {0.1}, 1, 0), ConfigError);
  EXPECT_THROW(build_corpus(refs, {}, {0.1}, 1, 0), ConfigError);
  EXPECT_THROW(build_corpus(refs, refs, {}, 1, 0), ConfigError);
  EXPECT_THROW(build_corpus(refs, refs, {0.1}, 0, 0), ConfigError);
}

TEST(CorpusManifestJson, RoundTrip) {
  const auto refs = noise_clips("r", 2, 1.0, 16);
  const Corpus c = build_corpus(refs, refs, {0.05, 0.25}, 2, 3, "jazz", ReplicaOptions{5.0});
  const nlohmann::json doc = to_json(c.manifest);
  for (const char* key : {"genre", "degrees", "replicas_per_song", "seed", "specs"}) EXPECT_TRUE(doc.contains(key)) << key;
  for (const char* key : {"reference_id", "mixture_id", "replica_id", "proportion", "copy_start_s", "insert_at_s"}) {
    EXPECT_TRUE(doc["specs"][0].contains(key)) << key;
  }
  EXPECT_EQ(corpus_manifest_from_json(nlohmann::json::parse(doc.dump())), c.manifest);
}
