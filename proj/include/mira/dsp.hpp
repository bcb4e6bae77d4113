#pragma once

#include <Eigen/Core>
#include <vector>

#include "mira/audio_io.hpp"

namespace mira {

inline constexpr int kPitchClasses = 12;

/// Row-major F x 12 chroma storage, one frame per row.
template <typename Scalar>
using ChromaFrames = Eigen::Matrix<Scalar, Eigen::Dynamic, kPitchClasses, Eigen::RowMajor>;

/// Per-frame pitch-class profile. Pitch class 0 is C, 9 is A (440 Hz).
/// Each non-silent frame is max-normalized; silent frames are all zero.
struct Chromagram {
  ChromaFrames<float> frames;
  double frame_rate = 0.0;

  Eigen::Index size() const { return frames.rows(); }
  bool empty() const { return frames.rows() == 0; }
};

struct SpectralFrame {
  Eigen::VectorXf magnitudes;  // frame_size/2 + 1 bins
  double bin_hz = 0.0;
};

struct SpectralPeak {
  double frequency_hz = 0.0;
  double magnitude = 0.0;
};

struct HpcpParams {
  int frame_size = 4096;
  int hop = 2048;
  double min_frequency_hz = 40.0;
  double max_frequency_hz = 5000.0;
  int harmonics = 8;              // harmonic k contributes with weight 1/k
  double window_semitones = 1.33;  // cos^2 half-width around each bin
  double peak_threshold = 1e-5;
  int max_peaks = 100;
  double reference_hz = 440.0;
};

/// Hann-windowed magnitude spectra. Magnitudes are scaled so that a sine of
/// amplitude a peaks near a. Throws EmptyInputError if the clip is shorter
/// than one frame and InvalidInputError for a non power-of-two frame size or
/// hop outside (0, frame_size].
std::vector<SpectralFrame> stft(const AudioClip& clip, int frame_size, int hop);

/// Local maxima at or above min_magnitude, frequency refined by parabolic
/// interpolation on log magnitude. Sorted by magnitude, strongest first.
std::vector<SpectralPeak> spectral_peaks(const SpectralFrame& frame, int max_peaks, double min_magnitude);

Chromagram compute_hpcp(const AudioClip& clip, const HpcpParams& params = {});

inline constexpr int kBuiltinEmbeddingDim = 16;
inline constexpr double kLogEnergyFloor = -10.0;

/// Fallback track embedding, one row per whole second (at least one row):
/// mean chroma (12), log energy floored at -10, then spectral centroid,
/// 85% rolloff (both as a fraction of Nyquist) and flatness.
Eigen::MatrixXf builtin_embedding(const AudioClip& clip, const HpcpParams& params = {});

/// Chromagram and builtin embedding from a single STFT pass.
struct ClipFeatures {
  Chromagram chroma;
  Eigen::MatrixXf embedding;
};
ClipFeatures extract_features(const AudioClip& clip, const HpcpParams& params = {});

}  // namespace mira
