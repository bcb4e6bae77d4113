#include "mira/cover.hpp"

#include <algorithm>
#include <cmath>

#include "mira/error.hpp"

namespace mira {

namespace {

Eigen::Index neighbour_count(double kappa, Eigen::Index frames) {
  const auto k = static_cast<Eigen::Index>(std::llround(kappa * static_cast<double>(frames)));
  return std::clamp<Eigen::Index>(k, 1, frames);
}

void require_frames(const Chromagram& c, const char* which) {
  if (c.empty()) throw EmptyInputError(std::string(which) + " chromagram has no frames");
}

void check_params(const CoverIdParams& p) {
  if (!(p.kappa > 0.0 && p.kappa < 1.0)) throw InvalidInputError("kappa must lie in (0, 1)");
  if (p.gap_onset < 0.0 || p.gap_extend < 0.0) throw InvalidInputError("gap penalties must be non-negative");
}

}  // namespace

Eigen::Matrix<float, 1, kPitchClasses> global_chroma(const Chromagram& chroma) {
  require_frames(chroma, "input");
  Eigen::Matrix<float, 1, kPitchClasses> g = chroma.frames.cast<double>().colwise().mean().cast<float>();
  const float peak = g.maxCoeff();
  if (peak > 0.0f) g /= peak;
  return g;
}

Chromagram transpose_chroma(const Chromagram& chroma, int shift) {
  shift = ((shift % kPitchClasses) + kPitchClasses) % kPitchClasses;
  Chromagram out;
  out.frame_rate = chroma.frame_rate;
  out.frames.resize(chroma.frames.rows(), kPitchClasses);
  for (int b = 0; b < kPitchClasses; ++b) {
    out.frames.col(b) = chroma.frames.col((b + shift) % kPitchClasses);
  }
  return out;
}

int estimate_oti(const Chromagram& ref, const Chromagram& tgt) {
  require_frames(ref, "reference");
  require_frames(tgt, "target");
  const auto g_ref = global_chroma(ref);
  const auto g_tgt = global_chroma(tgt);
  int best = 0;
  double best_score = -1.0;
  for (int k = 0; k < kPitchClasses; ++k) {
    double score = 0.0;
    for (int b = 0; b < kPitchClasses; ++b) {
      score += static_cast<double>(g_ref[b]) * g_tgt[(b + k) % kPitchClasses];
    }
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

CrossRecurrencePlot cross_recurrence(const Chromagram& ref, const Chromagram& tgt, int oti,
                                     const CoverIdParams& params, CoverIdWorkspace& work) {
  check_params(params);
  require_frames(ref, "reference");
  require_frames(tgt, "target");
  const Chromagram shifted = transpose_chroma(tgt, oti);
  const Eigen::Index nr = ref.size();
  const Eigen::Index nt = tgt.size();

  auto& dist = work.distances;
  dist.resize(nr, nt);
  for (Eigen::Index i = 0; i < nr; ++i) {
    for (Eigen::Index j = 0; j < nt; ++j) {
      dist(i, j) = (ref.frames.row(i) - shifted.frames.row(j)).squaredNorm();
    }
  }

  const Eigen::Index k_row = neighbour_count(params.kappa, nt);
  const Eigen::Index k_col = neighbour_count(params.kappa, nr);

  // Per-row and per-column k-th neighbour as (distance, index) thresholds.
  std::vector<float> row_d(static_cast<std::size_t>(nr));
  std::vector<std::uint32_t> row_i(static_cast<std::size_t>(nr));
  std::vector<float> col_d(static_cast<std::size_t>(nt));
  std::vector<std::uint32_t> col_i(static_cast<std::size_t>(nt));

  auto& order = work.order;
  for (Eigen::Index i = 0; i < nr; ++i) {
    order.resize(static_cast<std::size_t>(nt));
    for (Eigen::Index j = 0; j < nt; ++j) order[static_cast<std::size_t>(j)] = static_cast<std::uint32_t>(j);
    const float* row = dist.data() + i * nt;
    std::nth_element(order.begin(), order.begin() + (k_row - 1), order.end(),
                     [row](std::uint32_t a, std::uint32_t b) {
                       return row[a] < row[b] || (row[a] == row[b] && a < b);
                     });
    const std::uint32_t kth = order[static_cast<std::size_t>(k_row - 1)];
    row_d[static_cast<std::size_t>(i)] = row[kth];
    row_i[static_cast<std::size_t>(i)] = kth;
  }
  auto& column = work.column;
  column.resize(static_cast<std::size_t>(nr));
  for (Eigen::Index j = 0; j < nt; ++j) {
    for (Eigen::Index i = 0; i < nr; ++i) column[static_cast<std::size_t>(i)] = dist(i, j);
    order.resize(static_cast<std::size_t>(nr));
    for (Eigen::Index i = 0; i < nr; ++i) order[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i);
    const float* col = column.data();
    std::nth_element(order.begin(), order.begin() + (k_col - 1), order.end(),
                     [col](std::uint32_t a, std::uint32_t b) {
                       return col[a] < col[b] || (col[a] == col[b] && a < b);
                     });
    const std::uint32_t kth = order[static_cast<std::size_t>(k_col - 1)];
    col_d[static_cast<std::size_t>(j)] = col[kth];
    col_i[static_cast<std::size_t>(j)] = kth;
  }

  CrossRecurrencePlot crp;
  crp.matrix.resize(nr, nt);
  for (Eigen::Index i = 0; i < nr; ++i) {
    const float rd = row_d[static_cast<std::size_t>(i)];
    const std::uint32_t ri = row_i[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < nt; ++j) {
      const float d = dist(i, j);
      const auto ju = static_cast<std::uint32_t>(j);
      const auto iu = static_cast<std::uint32_t>(i);
      const bool in_row = d < rd || (d == rd && ju <= ri);
      const float cd = col_d[static_cast<std::size_t>(j)];
      const bool in_col = d < cd || (d == cd && iu <= col_i[static_cast<std::size_t>(j)]);
      crp.matrix(i, j) = (in_row && in_col) ? 1 : 0;
    }
  }
  return crp;
}

CrossRecurrencePlot cross_recurrence(const Chromagram& ref, const Chromagram& tgt, int oti,
                                     const CoverIdParams& params) {
  CoverIdWorkspace work;
  return cross_recurrence(ref, tgt, oti, params, work);
}

double qmax_score(const CrossRecurrencePlot& crp, const CoverIdParams& params, CoverIdWorkspace& work) {
  const Eigen::Index nr = crp.rows();
  const Eigen::Index nt = crp.cols();
  if (nr == 0 || nt == 0) return 0.0;

  // Two rows and columns of zero padding so every cell has all three predecessors.
  auto& q = work.alignment;
  q.setZero(nr + 2, nt + 2);
  const auto gamma = [&](Eigen::Index i, Eigen::Index j) -> float {
    if (i < 2 || j < 2) return static_cast<float>(params.gap_extend);
    return static_cast<float>(crp.matrix(i - 2, j - 2) ? params.gap_onset : params.gap_extend);
  };

  float best = 0.0f;
  for (Eigen::Index i = 2; i < nr + 2; ++i) {
    for (Eigen::Index j = 2; j < nt + 2; ++j) {
      const float diag = q(i - 1, j - 1);
      const float up = q(i - 2, j - 1);
      const float left = q(i - 1, j - 2);
      float value;
      if (crp.matrix(i - 2, j - 2)) {
        value = std::max({diag, up, left}) + 1.0f;
      } else {
        value = std::max({0.0f, diag - gamma(i - 1, j - 1), up - gamma(i - 2, j - 1), left - gamma(i - 1, j - 2)});
      }
      q(i, j) = value;
      best = std::max(best, value);
    }
  }
  return best;
}

double qmax_score(const CrossRecurrencePlot& crp, const CoverIdParams& params) {
  CoverIdWorkspace work;
  return qmax_score(crp, params, work);
}

double coverid_distance(const Chromagram& ref, const Chromagram& tgt, const CoverIdParams& params,
                        CoverIdWorkspace& work) {
  const int oti = estimate_oti(ref, tgt);
  const CrossRecurrencePlot crp = cross_recurrence(ref, tgt, oti, params, work);
  const double score = qmax_score(crp, params, work);
  return std::sqrt(static_cast<double>(tgt.size())) / (score + kCoverIdEpsilon);
}

double coverid_distance(const Chromagram& ref, const Chromagram& tgt, const CoverIdParams& params) {
  CoverIdWorkspace work;
  return coverid_distance(ref, tgt, params, work);
}

double coverid_distance(const AudioClip& ref, const AudioClip& tgt, const CoverIdParams& params) {
  return coverid_distance(compute_hpcp(ref), compute_hpcp(tgt), params);
}

}  // namespace mira
