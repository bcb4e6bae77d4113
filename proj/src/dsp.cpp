#include "mira/dsp.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "mira/error.hpp"

namespace mira {

namespace {

constexpr double kRolloffFraction = 0.85;
constexpr double kPowerFloor = 1e-20;

void check_frame_params(int frame_size, int hop) {
  if (frame_size <= 0 || (frame_size & (frame_size - 1)) != 0) {
    throw InvalidInputError("frame size must be a power of two");
  }
  if (hop <= 0 || hop > frame_size) throw InvalidInputError("hop must be in (0, frame_size]");
}

/// Reusable windowed-FFT state for one frame size.
class SpectrumAnalyzer {
 public:
  SpectrumAnalyzer(int frame_size, int sample_rate)
      : frame_size_(frame_size),
        bin_hz_(static_cast<double>(sample_rate) / frame_size),
        window_(frame_size),
        buffer_(static_cast<std::size_t>(frame_size)) {
    fft_.SetFlag(Eigen::FFT<float>::HalfSpectrum);
    for (int i = 0; i < frame_size; ++i) {
      window_[i] = static_cast<float>(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / frame_size));
    }
    // Periodic Hann sums to N/2; halve again for the one-sided amplitude.
    scale_ = 4.0f / static_cast<float>(frame_size);
  }

  void analyze(const float* samples, SpectralFrame& out) {
    for (int i = 0; i < frame_size_; ++i) buffer_[static_cast<std::size_t>(i)] = samples[i] * window_[i];
    fft_.fwd(spectrum_, buffer_);
    const int bins = frame_size_ / 2 + 1;
    out.bin_hz = bin_hz_;
    out.magnitudes.resize(bins);
    for (int k = 0; k < bins; ++k) out.magnitudes[k] = std::abs(spectrum_[static_cast<std::size_t>(k)]) * scale_;
  }

 private:
  int frame_size_;
  double bin_hz_;
  Eigen::VectorXf window_;
  std::vector<float> buffer_;
  std::vector<std::complex<float>> spectrum_;
  Eigen::FFT<float> fft_;
  float scale_;
};

double circular_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), static_cast<double>(kPitchClasses));
  return std::min(d, kPitchClasses - d);
}

void accumulate_hpcp(const std::vector<SpectralPeak>& peaks, const HpcpParams& p, Eigen::Ref<Eigen::RowVectorXf> row) {
  Eigen::Matrix<double, 1, kPitchClasses> acc = Eigen::Matrix<double, 1, kPitchClasses>::Zero();
  const double half = p.window_semitones;
  for (const auto& peak : peaks) {
    if (peak.frequency_hz < p.min_frequency_hz || peak.frequency_hz > p.max_frequency_hz) continue;
    const double energy = peak.magnitude * peak.magnitude;
    for (int h = 1; h <= p.harmonics; ++h) {
      const double f0 = peak.frequency_hz / h;
      double pc = std::fmod(12.0 * std::log2(f0 / p.reference_hz) + 9.0, 12.0);
      if (pc < 0) pc += 12.0;
      for (int b = 0; b < kPitchClasses; ++b) {
        const double d = circular_distance(pc, b);
        if (d > half) continue;
        const double c = std::cos(std::numbers::pi / 2.0 * d / half);
        acc[b] += c * c * energy / h;
      }
    }
  }
  const double peak = acc.maxCoeff();
  if (peak > 0.0) {
    row = (acc / peak).cast<float>();
  } else {
    row.setZero();
  }
}

struct SpectralSummary {
  double centroid = 0.0;
  double rolloff = 0.0;
  double flatness = 0.0;
};

SpectralSummary summarize_spectrum(const SpectralFrame& frame) {
  const Eigen::Index bins = frame.magnitudes.size();
  const Eigen::ArrayXd power = frame.magnitudes.cast<double>().array().square();
  const double total = power.sum();
  SpectralSummary s;
  if (total < kPowerFloor * static_cast<double>(bins)) return s;
  const double nyquist_bin = static_cast<double>(bins - 1);
  double weighted = 0.0;
  for (Eigen::Index k = 0; k < bins; ++k) weighted += static_cast<double>(k) * power[k];
  s.centroid = weighted / total / nyquist_bin;
  double cumulative = 0.0;
  for (Eigen::Index k = 0; k < bins; ++k) {
    cumulative += power[k];
    if (cumulative >= kRolloffFraction * total) {
      s.rolloff = static_cast<double>(k) / nyquist_bin;
      break;
    }
  }
  const double geo = std::exp((power + kPowerFloor).log().mean());
  s.flatness = geo / (total / static_cast<double>(bins));
  return s;
}

}  // namespace

std::vector<SpectralFrame> stft(const AudioClip& clip, int frame_size, int hop) {
  check_frame_params(frame_size, hop);
  const Eigen::Index n = clip.samples.size();
  if (n < frame_size) throw EmptyInputError("clip '" + clip.id + "' is shorter than one analysis frame");
  const Eigen::Index count = (n - frame_size) / hop + 1;
  SpectrumAnalyzer analyzer(frame_size, clip.sample_rate);
  std::vector<SpectralFrame> frames(static_cast<std::size_t>(count));
  for (Eigen::Index f = 0; f < count; ++f) {
    analyzer.analyze(clip.samples.data() + f * hop, frames[static_cast<std::size_t>(f)]);
  }
  return frames;
}

std::vector<SpectralPeak> spectral_peaks(const SpectralFrame& frame, int max_peaks, double min_magnitude) {
  std::vector<SpectralPeak> peaks;
  const auto& m = frame.magnitudes;
  for (Eigen::Index k = 1; k + 1 < m.size(); ++k) {
    const double b = m[k];
    if (b <= 0.0 || b < min_magnitude) continue;
    if (!(b > m[k - 1] && b >= m[k + 1])) continue;
    double offset = 0.0;
    double mag = b;
    if (m[k - 1] > 0.0 && m[k + 1] > 0.0) {
      const double la = std::log(static_cast<double>(m[k - 1]));
      const double lb = std::log(b);
      const double lc = std::log(static_cast<double>(m[k + 1]));
      const double denom = la - 2.0 * lb + lc;
      if (denom < 0.0) {
        offset = 0.5 * (la - lc) / denom;
        mag = std::exp(lb - 0.25 * (la - lc) * offset);
      }
    }
    peaks.push_back({(static_cast<double>(k) + offset) * frame.bin_hz, mag});
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const SpectralPeak& x, const SpectralPeak& y) { return x.magnitude > y.magnitude; });
  if (max_peaks >= 0 && peaks.size() > static_cast<std::size_t>(max_peaks)) {
    peaks.resize(static_cast<std::size_t>(max_peaks));
  }
  return peaks;
}

ClipFeatures extract_features(const AudioClip& clip, const HpcpParams& params) {
  check_frame_params(params.frame_size, params.hop);
  const Eigen::Index n = clip.samples.size();
  const int rate = clip.sample_rate;
  const Eigen::Index frame_count =
      n >= params.frame_size ? (n - params.frame_size) / params.hop + 1 : 0;
  const Eigen::Index rows = std::max<Eigen::Index>(1, n / rate);

  ClipFeatures out;
  out.chroma.frame_rate = static_cast<double>(rate) / params.hop;
  out.chroma.frames.setZero(frame_count, kPitchClasses);
  out.embedding.setZero(rows, kBuiltinEmbeddingDim);

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(rows, kBuiltinEmbeddingDim);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(rows);

  if (frame_count > 0) {
    SpectrumAnalyzer analyzer(params.frame_size, rate);
    SpectralFrame frame;
    for (Eigen::Index f = 0; f < frame_count; ++f) {
      analyzer.analyze(clip.samples.data() + f * params.hop, frame);
      accumulate_hpcp(spectral_peaks(frame, params.max_peaks, params.peak_threshold), params,
                      out.chroma.frames.row(f));
      const double center = static_cast<double>(f * params.hop + params.frame_size / 2) / rate;
      const Eigen::Index w = std::min<Eigen::Index>(rows - 1, static_cast<Eigen::Index>(center));
      const SpectralSummary s = summarize_spectrum(frame);
      sums.row(w).head(kPitchClasses) += out.chroma.frames.row(f).cast<double>();
      sums(w, 13) += s.centroid;
      sums(w, 14) += s.rolloff;
      sums(w, 15) += s.flatness;
      counts[w] += 1.0;
    }
  }

  for (Eigen::Index w = 0; w < rows; ++w) {
    if (counts[w] > 0) out.embedding.row(w) = (sums.row(w) / counts[w]).cast<float>();
    const Eigen::Index begin = w * rate;
    const Eigen::Index len = (w + 1 == rows) ? std::max<Eigen::Index>(0, std::min<Eigen::Index>(n - begin, rate))
                                             : rate;
    double energy = kLogEnergyFloor;
    if (len > 0) {
      const double ms = clip.samples.segment(begin, len).cast<double>().squaredNorm() / static_cast<double>(len);
      if (ms > 0.0) energy = std::max(kLogEnergyFloor, std::log(ms));
    }
    out.embedding(w, 12) = static_cast<float>(energy);
  }
  return out;
}

Chromagram compute_hpcp(const AudioClip& clip, const HpcpParams& params) {
  check_frame_params(params.frame_size, params.hop);
  if (clip.samples.size() < params.frame_size) {
    throw EmptyInputError("clip '" + clip.id + "' is shorter than one analysis frame");
  }
  return extract_features(clip, params).chroma;
}

Eigen::MatrixXf builtin_embedding(const AudioClip& clip, const HpcpParams& params) {
  return extract_features(clip, params).embedding;
}

}  // namespace mira
