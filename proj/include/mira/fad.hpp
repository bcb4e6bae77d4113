#pragma once

// Frechet distance between Gaussian fits of two embedding sets.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "mira/embedding.hpp"
#include "mira/error.hpp"

namespace mira {

template <typename Scalar>
struct GaussianFit {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector mean;
  Matrix cov;
  Eigen::Index samples = 0;
  /// Fewer samples than dimensions; the covariance is rank deficient.
  bool low_sample = false;

  Eigen::Index dim() const { return mean.size(); }
};

inline constexpr double kSymmetryTolerance = 1e-6;

/// Symmetric square root by eigendecomposition with eigenvalues clamped at 0.
/// Throws InvalidInputError if `m` is not square or is asymmetric beyond 1e-6
/// (relative to its largest entry when that exceeds 1).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> psd_sqrt(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.rows() != m.cols()) throw InvalidInputError("psd_sqrt of a non-square matrix");
  if (m.size() == 0) return Matrix(0, 0);
  const Matrix a = m;
  const Scalar scale = std::max<Scalar>(Scalar(1), a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > Scalar(kSymmetryTolerance) * scale) {
    throw InvalidInputError("psd_sqrt of an asymmetric matrix");
  }
  const Matrix sym = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw InvalidInputError("eigendecomposition failed");
  const auto roots = solver.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

/// Mean and unbiased covariance of the rows of `samples`; the covariance is
/// symmetrized and its eigenvalues clamped at 0.
template <typename Derived>
GaussianFit<typename Derived::Scalar> fit_gaussian(const Eigen::MatrixBase<Derived>& samples) {
  using Scalar = typename Derived::Scalar;
  using Fit = GaussianFit<Scalar>;
  const Eigen::Index n = samples.rows();
  if (n < 2) throw InsufficientDataError("Gaussian fit needs at least 2 vectors, got " + std::to_string(n));
  Fit fit;
  fit.samples = n;
  fit.low_sample = n < samples.cols();
  fit.mean = samples.colwise().mean().transpose();
  const typename Fit::Matrix centered = samples.rowwise() - fit.mean.transpose();
  typename Fit::Matrix cov = (centered.transpose() * centered) / Scalar(n - 1);
  cov = (cov + cov.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<typename Fit::Matrix> solver(cov);
  if (solver.eigenvalues().minCoeff() < Scalar(0)) {
    const auto clamped = solver.eigenvalues().cwiseMax(Scalar(0));
    cov = solver.eigenvectors() * clamped.asDiagonal() * solver.eigenvectors().transpose();
    cov = (cov + cov.transpose()) / Scalar(2);
  }
  fit.cov = std::move(cov);
  return fit;
}

/// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 sqrt(sqrt(S1) S2 sqrt(S1))). A positive
/// `jitter` is added to the inner product's diagonal.
template <typename Scalar>
Scalar frechet_distance(const GaussianFit<Scalar>& a, const GaussianFit<Scalar>& b, Scalar jitter = Scalar(0)) {
  using Matrix = typename GaussianFit<Scalar>::Matrix;
  if (a.dim() != b.dim() || a.cov.rows() != a.dim() || b.cov.rows() != b.dim()) {
    throw DimensionError("Frechet distance between fits of dimension " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()));
  }
  const Scalar mean_term = (a.mean - b.mean).squaredNorm();
  const Matrix root_a = psd_sqrt(a.cov);
  Matrix inner = root_a * b.cov * root_a;
  inner = (inner + inner.transpose()) / Scalar(2);
  if (jitter > Scalar(0)) inner.diagonal().array() += jitter;
  const Scalar cross = psd_sqrt(inner).trace();
  const Scalar value = mean_term + a.cov.trace() + b.cov.trace() - Scalar(2) * cross;
  return std::max(Scalar(0), value);
}

/// Every frame of every track stacked into one matrix, tracks in id order.
Eigen::MatrixXd pool_frames(const EmbeddingSet& set);

/// Set-level FAD; there is no per-pair variant. Throws ConfigError when the
/// sets come from different models.
double fad_score(const EmbeddingSet& reference, const EmbeddingSet& target);

}  // namespace mira
