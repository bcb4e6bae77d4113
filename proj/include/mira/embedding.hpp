#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <filesystem>
#include <map>
#include <string>

#include "mira/dsp.hpp"
#include "mira/error.hpp"

namespace mira {

/// Per-track frame embeddings from one model. All matrices share `dim` columns.
struct EmbeddingSet {
  std::string model_id;
  std::map<std::string, Eigen::MatrixXf> entries;
  Eigen::Index dim = 0;

  /// Inserts a track, enforcing the shared dimension and finite values.
  void add(const std::string& track_id, Eigen::MatrixXf frames);
};

/// A discrete distribution; non-negative, sums to 1 within 1e-4.
struct ProbDistribution {
  Eigen::VectorXd probs;

  static ProbDistribution from(Eigen::VectorXd probs);
  Eigen::Index size() const { return probs.size(); }
};

inline constexpr double kDefaultKlEpsilon = 1e-10;
inline constexpr double kProbSumTolerance = 1e-4;

// MIRAEMB1: "MIRAEMB1", u32 D, u32 N, N*D float32 row-major, little-endian.
Eigen::MatrixXf read_embedding_file(const std::filesystem::path& path);
void write_embedding_file(const std::filesystem::path& path, const Eigen::MatrixXf& frames);

// MIRAPRB1: "MIRAPRB1", u32 K, u32 N, N*K float32; every row sums to 1.
Eigen::MatrixXf read_prob_file(const std::filesystem::path& path);
void write_prob_file(const std::filesystem::path& path, const Eigen::MatrixXf& rows);

/// Reads {"model_id": str, "tracks": {track_id: relative_path}}. Paths are
/// resolved against the manifest's directory.
EmbeddingSet load_embedding_set(const std::filesystem::path& manifest, const std::string& model_id);

/// Frame mean, L2-normalized. A zero mean stays zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> aggregate_track(const Eigen::MatrixBase<Derived>& frames) {
  using Scalar = typename Derived::Scalar;
  if (frames.rows() == 0) throw EmptyInputError("embedding matrix has no frames");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mean = frames.colwise().mean().transpose();
  const Scalar norm = mean.norm();
  if (norm > Scalar(0)) mean /= norm;
  return mean;
}

/// dot(a, b) / (|a| |b|). Throws DegenerateInputError on a zero vector.
template <typename DerivedA, typename DerivedB>
double cosine_score(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw DimensionError("cosine of vectors with different dimensions");
  const Eigen::VectorXd x = a.template cast<double>();
  const Eigen::VectorXd y = b.template cast<double>();
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) throw DegenerateInputError("cosine of a zero vector");
  return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

/// Natural-log KL(p'||q') after adding eps to every entry and renormalizing.
double kl_divergence(const ProbDistribution& p, const ProbDistribution& q, double eps = kDefaultKlEpsilon);

/// (KL(p||q) + KL(q||p)) / 2.
double symmetric_kl(const ProbDistribution& p, const ProbDistribution& q, double eps = kDefaultKlEpsilon);

/// Normalized mean chroma over the 12 pitch classes; uniform for silence.
ProbDistribution builtin_distribution(const Chromagram& chroma);

/// Mean of the rows of a MIRAPRB1 matrix as one distribution.
ProbDistribution distribution_from_rows(const Eigen::MatrixXf& rows);

}  // namespace mira
