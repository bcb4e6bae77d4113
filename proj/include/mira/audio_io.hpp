#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>

namespace mira {

/// Engine-wide analysis rate. Metrics consume clips at this rate.
inline constexpr int kDefaultSampleRate = 44100;

/// Decoded mono audio. Samples are expected in [-1, 1].
struct AudioClip {
  std::string id;
  Eigen::VectorXf samples;
  int sample_rate = kDefaultSampleRate;

  Eigen::Index size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

/// Throws InvalidInputError when the rate is non-positive or any sample
/// magnitude exceeds 1 + 1e-6.
void validate_clip(const AudioClip& clip);

/// Reads 16/24-bit integer or 32-bit float PCM WAVE (1 or 2 channels),
/// mixes down to mono and resamples to target_rate. The id is the file stem.
AudioClip load_wav(const std::filesystem::path& path, int target_rate = kDefaultSampleRate);

/// Writes 16-bit PCM mono. Samples are clamped to the int16 range, never wrapped.
void save_wav(const AudioClip& clip, const std::filesystem::path& path);

/// Kaiser-windowed sinc resampler, 32 taps per side at the lower of the two rates.
AudioClip resample(const AudioClip& clip, int new_rate);

}  // namespace mira
