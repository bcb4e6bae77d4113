#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "mira/audio_io.hpp"
#include "mira/dsp.hpp"

namespace mira {

struct CoverIdParams {
  double kappa = 0.095;      // neighbor fraction for the cross-recurrence plot
  double gap_onset = 0.5;
  double gap_extend = 0.5;
};

/// Binary F_ref x F_tgt matrix of mutual nearest-neighbour frame pairs.
struct CrossRecurrencePlot {
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> matrix;

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }
};

/// Scratch buffers reused across pairs by one worker.
struct CoverIdWorkspace {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> distances;
  std::vector<std::uint32_t> order;
  std::vector<float> column;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> alignment;
};

/// Frame mean, then max-normalized.
Eigen::Matrix<float, 1, kPitchClasses> global_chroma(const Chromagram& chroma);

/// Rotates every frame so that output bin b holds input bin (b + shift) mod 12.
Chromagram transpose_chroma(const Chromagram& chroma, int shift);

/// Optimal transposition index. Shift k aligns target bin (b + k) mod 12 with
/// reference bin b, so a target transposed up by k semitones yields k.
/// Ties go to the smallest k.
int estimate_oti(const Chromagram& ref, const Chromagram& tgt);

/// Frame (i, j) is set iff j is among the round(kappa * F_tgt) nearest target
/// frames of reference frame i and i is among the round(kappa * F_ref)
/// nearest reference frames of j (at least one neighbour each way).
/// Equal distances are ordered by frame index.
CrossRecurrencePlot cross_recurrence(const Chromagram& ref, const Chromagram& tgt, int oti,
                                     const CoverIdParams& params = {});
CrossRecurrencePlot cross_recurrence(const Chromagram& ref, const Chromagram& tgt, int oti,
                                     const CoverIdParams& params, CoverIdWorkspace& work);

/// Qmax local alignment score over a cross-recurrence plot.
double qmax_score(const CrossRecurrencePlot& crp, const CoverIdParams& params = {});
double qmax_score(const CrossRecurrencePlot& crp, const CoverIdParams& params, CoverIdWorkspace& work);

inline constexpr double kCoverIdEpsilon = 1e-9;

/// sqrt(F_tgt) / (Qmax + 1e-9); lower means more shared composition.
double coverid_distance(const Chromagram& ref, const Chromagram& tgt, const CoverIdParams& params,
                        CoverIdWorkspace& work);
double coverid_distance(const Chromagram& ref, const Chromagram& tgt, const CoverIdParams& params = {});
double coverid_distance(const AudioClip& ref, const AudioClip& tgt, const CoverIdParams& params = {});

}  // namespace mira
