#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mira/embedding.hpp"
#include "mira/error.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;
using namespace mira;
using mira::support::TempDir;

namespace {

// Independent little-endian encoder for MIRAEMB1 / MIRAPRB1.
void write_raw(const fs::path& path, const std::string& magic, std::uint32_t cols, std::uint32_t rows,
               const std::vector<float>& values, std::size_t drop = 0, std::size_t extra = 0) {
  std::vector<unsigned char> b(magic.begin(), magic.end());
  for (std::uint32_t v : {cols, rows}) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  }
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xFF));
  }
  b.resize(b.size() - drop);
  b.insert(b.end(), extra, 0);
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(b.data()),
                                              static_cast<std::streamsize>(b.size()));
}

void write_manifest(const fs::path& path, const std::string& model, const std::vector<std::pair<std::string, std::string>>& tracks) {
  std::ofstream out(path);
  out << "{\"model_id\": \"" << model << "\", \"tracks\": {";
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    out << (i ? ", " : "") << '"' << tracks[i].first << "\": \"" << tracks[i].second << '"';
  }
  out << "}}";
}

ProbDistribution dist(std::initializer_list<double> v) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return ProbDistribution::from(p);
}

}  // namespace

TEST(EmbeddingFile, DecodesRowMajorPayload) {
  TempDir dir;
  write_raw(dir / "a.emb", "MIRAEMB1", 3, 2, {1, 2, 3, 4, 5, 6});
  const Eigen::MatrixXf m = read_embedding_file(dir / "a.emb");
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 3);
  EXPECT_EQ(m(0, 2), 3.0f);
  EXPECT_EQ(m(1, 0), 4.0f);
}

TEST(EmbeddingFile, RoundTripsExactly) {
  TempDir dir;
  std::mt19937 rng(3);
  std::normal_distribution<float> g;
  Eigen::MatrixXf m(5, 16);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  write_embedding_file(dir / "r.emb", m);
  EXPECT_EQ(read_embedding_file(dir / "r.emb"), m);
  EXPECT_EQ(fs::file_size(dir / "r.emb"), 16u + 5u * 16u * 4u);
}

TEST(EmbeddingFile, RejectsBadMagic) {
  TempDir dir;
  write_raw(dir / "b.emb", "MIRAEMB2", 2, 1, {1, 2});
  EXPECT_THROW(read_embedding_file(dir / "b.emb"), FormatError);
}

TEST(EmbeddingFile, TruncatedPayloadIsCorrupt) {
  TempDir dir;
  write_raw(dir / "t.emb", "MIRAEMB1", 2, 2, {1, 2, 3, 4}, 3);
  EXPECT_THROW(read_embedding_file(dir / "t.emb"), CorruptFileError);
  write_raw(dir / "h.emb", "MIRAEMB1", 2, 2, {}, 6);
  EXPECT_THROW(read_embedding_file(dir / "h.emb"), CorruptFileError);
}

TEST(EmbeddingFile, TrailingBytesAreAFormatError) {
  TempDir dir;
  write_raw(dir / "x.emb", "MIRAEMB1", 2, 1, {1, 2}, 0, 4);
  EXPECT_THROW(read_embedding_file(dir / "x.emb"), FormatError);
}

TEST(EmbeddingFile, NonFiniteValuesRejected) {
  TempDir dir;
  write_raw(dir / "n.emb", "MIRAEMB1", 2, 1, {1, std::nanf("")});
  EXPECT_THROW(read_embedding_file(dir / "n.emb"), FormatError);
}

TEST(EmbeddingFile, MissingFileIsIoError) {
  EXPECT_THROW(read_embedding_file("/nonexistent/x.emb"), IoError);
}

TEST(ProbFile, RowsMustSumToOne) {
  TempDir dir;
  write_raw(dir / "ok.prb", "MIRAPRB1", 3, 2, {0.2f, 0.3f, 0.5f, 1.0f, 0.0f, 0.0f});
  const Eigen::MatrixXf rows = read_prob_file(dir / "ok.prb");
  EXPECT_EQ(rows.rows(), 2);
  write_raw(dir / "near.prb", "MIRAPRB1", 2, 1, {0.5f, 0.50005f});
  EXPECT_NO_THROW(read_prob_file(dir / "near.prb"));
  write_raw(dir / "bad.prb", "MIRAPRB1", 2, 1, {0.5f, 0.6f});
  EXPECT_THROW(read_prob_file(dir / "bad.prb"), FormatError);
  write_raw(dir / "neg.prb", "MIRAPRB1", 2, 1, {1.5f, -0.5f});
  EXPECT_THROW(read_prob_file(dir / "neg.prb"), FormatError);
  write_raw(dir / "emb.prb", "MIRAEMB1", 2, 1, {0.5f, 0.5f});
  EXPECT_THROW(read_prob_file(dir / "emb.prb"), FormatError);
}

TEST(ProbFile, RoundTripAndMeanDistribution) {
  TempDir dir;
  Eigen::MatrixXf rows(2, 2);
  rows << 1.0f, 0.0f, 0.0f, 1.0f;
  write_prob_file(dir / "p.prb", rows);
  const ProbDistribution d = distribution_from_rows(read_prob_file(dir / "p.prb"));
  EXPECT_DOUBLE_EQ(d.probs[0], 0.5);
  EXPECT_DOUBLE_EQ(d.probs[1], 0.5);
}

TEST(EmbeddingSetLoad, LoadsTracksRelativeToManifest) {
  TempDir dir;
  fs::create_directories(dir / "emb");
  write_embedding_file(dir / "emb" / "a.emb", Eigen::MatrixXf::Ones(3, 16));
  write_embedding_file(dir / "emb" / "b.emb", Eigen::MatrixXf::Zero(1, 16));
  write_manifest(dir / "m.json", "clap", {{"a", "emb/a.emb"}, {"b", "emb/b.emb"}});
  const EmbeddingSet set = load_embedding_set(dir / "m.json", "clap");
  EXPECT_EQ(set.model_id, "clap");
  EXPECT_EQ(set.entries.size(), 2u);
  EXPECT_EQ(set.dim, 16);
  EXPECT_EQ(set.entries.at("a").rows(), 3);
}

TEST(EmbeddingSetLoad, DimensionMismatchIsFormatError) {
  TempDir dir;
  write_embedding_file(dir / "a.emb", Eigen::MatrixXf::Ones(1, 16));
  write_embedding_file(dir / "b.emb", Eigen::MatrixXf::Ones(1, 512));
  write_manifest(dir / "m.json", "clap", {{"a", "a.emb"}, {"b", "b.emb"}});
  EXPECT_THROW(load_embedding_set(dir / "m.json", "clap"), FormatError);
}

TEST(EmbeddingSetLoad, MissingTrackFileNamesTheTrack) {
  TempDir dir;
  write_manifest(dir / "m.json", "clap", {{"ghost", "ghost.emb"}});
  try {
    load_embedding_set(dir / "m.json", "clap");
    FAIL() << "expected MissingEntryError";
  } catch (const MissingEntryError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(EmbeddingSetLoad, ModelMismatchIsConfigError) {
  TempDir dir;
  write_embedding_file(dir / "a.emb", Eigen::MatrixXf::Ones(1, 4));
  write_manifest(dir / "m.json", "clap", {{"a", "a.emb"}});
  EXPECT_THROW(load_embedding_set(dir / "m.json", "defnet"), ConfigError);
}

TEST(EmbeddingSetLoad, MalformedManifestIsFormatError) {
  TempDir dir;
  std::ofstream(dir / "m.json") << "{\"tracks\": 3";
  EXPECT_THROW(load_embedding_set(dir / "m.json", "clap"), FormatError);
}

TEST(AggregateTrack, NormalizesTheFrameMean) {
  Eigen::MatrixXd one(1, 2);
  one << 3, 4;
  const Eigen::VectorXd a = aggregate_track(one);
  EXPECT_NEAR(a[0], 0.6, 1e-12);
  EXPECT_NEAR(a[1], 0.8, 1e-12);

  const Eigen::VectorXd b = aggregate_track(Eigen::MatrixXd::Identity(2, 2));
  EXPECT_NEAR(b[0], 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(b[1], 1.0 / std::sqrt(2.0), 1e-12);

  EXPECT_TRUE(aggregate_track(Eigen::MatrixXd::Zero(3, 4)).isZero());
  EXPECT_THROW(aggregate_track(Eigen::MatrixXd(0, 4)), EmptyInputError);
}

TEST(CosineScore, AnalyticValues) {
  const Eigen::Vector2d x(1, 0);
  const Eigen::Vector2d y(0, 1);
  const Eigen::Vector2d d = Eigen::Vector2d(1, 1) / std::sqrt(2.0);
  EXPECT_NEAR(cosine_score(d, d), 1.0, 1e-12);
  EXPECT_NEAR(cosine_score(x, y), 0.0, 1e-12);
  EXPECT_NEAR(cosine_score(x, d), std::sqrt(0.5), 1e-9);
  EXPECT_NEAR(cosine_score(x, d), 0.70710678, 1e-8);
  EXPECT_THROW(cosine_score(x, Eigen::Vector2d::Zero()), DegenerateInputError);
  EXPECT_THROW(cosine_score(x, Eigen::Vector3d(1, 0, 0)), DimensionError);
}

TEST(CosineScore, ScaleInvariant) {
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd a(32), b(32);
    for (int i = 0; i < 32; ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
    }
    const double c = std::exp(g(rng) * 3);
    EXPECT_NEAR(cosine_score(c * a, b), cosine_score(a, b), 1e-9);
  }
}

TEST(Kl, IdentityIsZero) {
  const ProbDistribution p = dist({0.2, 0.3, 0.5});
  EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-12);
  EXPECT_NEAR(symmetric_kl(p, p), 0.0, 1e-12);
}

TEST(Kl, PointMassAgainstUniformIsLn2) {
  EXPECT_NEAR(kl_divergence(dist({1, 0}), dist({0.5, 0.5}), 1e-10), std::log(2.0), 1e-4);
}

TEST(Kl, SymmetricHandValue) {
  const ProbDistribution p = dist({0.9, 0.1});
  const ProbDistribution q = dist({0.1, 0.9});
  EXPECT_NEAR(symmetric_kl(p, q), 0.8 * std::log(9.0), 1e-4);
  EXPECT_EQ(symmetric_kl(p, q), symmetric_kl(q, p));
}

TEST(Kl, NonNegativeAndSymmetricOnRandomPairs) {
  std::mt19937 rng(5);
  std::gamma_distribution<double> g(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd a(8), b(8);
    for (int i = 0; i < 8; ++i) {
      a[i] = (trial % 3 == 0 && i < 3) ? 0.0 : g(rng) + 1e-300;
      b[i] = g(rng) + 1e-300;
    }
    const auto p = ProbDistribution::from(a / a.sum());
    const auto q = ProbDistribution::from(b / b.sum());
    EXPECT_GE(kl_divergence(p, q), -1e-12);
    EXPECT_EQ(symmetric_kl(p, q), symmetric_kl(q, p));
  }
}

TEST(Kl, ContinuousAtZeroEntries) {
  const ProbDistribution q = dist({0.5, 0.3, 0.2});
  const ProbDistribution p0 = dist({0.6, 0.4, 0.0});
  const ProbDistribution p1 = dist({0.6, 0.4 - 5e-11, 5e-11});
  EXPECT_LT(std::abs(kl_divergence(p0, q) - kl_divergence(p1, q)), 1e-6);
  const ProbDistribution r = dist({0.0, 0.7, 0.3});
  const ProbDistribution r1 = dist({2e-11, 0.7 - 2e-11, 0.3});
  EXPECT_LT(std::abs(kl_divergence(r, q) - kl_divergence(r1, q)), 1e-6);
}

TEST(Kl, LengthMismatchIsDimensionError) {
  EXPECT_THROW(kl_divergence(dist({0.5, 0.5}), dist({0.2, 0.3, 0.5})), DimensionError);
}

TEST(ProbDistributionCheck, RejectsInvalidVectors) {
  EXPECT_THROW(dist({0.5, 0.6}), InvalidInputError);
  EXPECT_THROW(dist({1.5, -0.5}), InvalidInputError);
  EXPECT_NO_THROW(dist({0.5, 0.50005}));
}

TEST(BuiltinDistribution, NormalizedMeanChroma) {
  Chromagram c;
  c.frames = Eigen::MatrixXf::Zero(2, kPitchClasses);
  c.frames(0, 0) = 1.0f;
  c.frames(1, 0) = 1.0f;
  c.frames(1, 7) = 1.0f;
  const ProbDistribution d = builtin_distribution(c);
  EXPECT_NEAR(d.probs.sum(), 1.0, 1e-12);
  EXPECT_NEAR(d.probs[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(d.probs[7], 1.0 / 3.0, 1e-12);

  Chromagram silent;
  silent.frames = Eigen::MatrixXf::Zero(3, kPitchClasses);
  EXPECT_TRUE(builtin_distribution(silent).probs.isApproxToConstant(1.0 / kPitchClasses));
}

TEST(EmbeddingSetAdd, EnforcesSharedDimension) {
  EmbeddingSet set;
  set.add("a", Eigen::MatrixXf::Ones(2, 4));
  EXPECT_THROW(set.add("b", Eigen::MatrixXf::Ones(2, 5)), FormatError);
  Eigen::MatrixXf bad = Eigen::MatrixXf::Ones(1, 4);
  bad(0, 1) = std::numeric_limits<float>::infinity();
  EXPECT_THROW(set.add("c", bad), FormatError);
}
