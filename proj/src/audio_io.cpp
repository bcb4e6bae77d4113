#include "mira/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <vector>

#include "mira/error.hpp"

namespace mira {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

constexpr int kTapsPerSide = 32;
constexpr double kKaiserBeta = 8.6;
// Cutoff as a fraction of the lower Nyquist frequency.
constexpr double kCutoff = 0.95;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

double bessel_i0(double x) {
  // Power series; converges quickly for the argument range used by the window.
  double sum = 1.0;
  double term = 1.0;
  const double half = x / 2.0;
  for (int k = 1; k < 200; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Kernel value at offset x measured in periods of the lower rate.
double kernel(double x, double inv_i0_beta) {
  const double r = x / kTapsPerSide;
  if (std::abs(r) >= 1.0) return 0.0;
  const double window = bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) * inv_i0_beta;
  return kCutoff * sinc(kCutoff * x) * window;
}

}  // namespace

void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate <= 0) {
    throw InvalidInputError("clip '" + clip.id + "' has non-positive sample rate");
  }
  if (clip.samples.size() > 0 && clip.samples.cwiseAbs().maxCoeff() > 1.0f + 1e-6f) {
    throw InvalidInputError("clip '" + clip.id + "' has samples outside [-1, 1]");
  }
}

AudioClip load_wav(const std::filesystem::path& path, int target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string();

  if (bytes.size() < 12) throw CorruptFileError(where + ": shorter than RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(where + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw CorruptFileError(where + ": truncated fmt chunk");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw CorruptFileError(where + ": truncated extensible fmt chunk");
        format = read_u16(bytes.data() + body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size()) throw CorruptFileError(where + ": truncated data chunk");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    if (body + size > bytes.size()) throw CorruptFileError(where + ": truncated chunk");
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw CorruptFileError(where + ": missing fmt chunk");
  if (data == nullptr) throw CorruptFileError(where + ": missing data chunk");

  const bool pcm_ok = format == kFormatPcm && (bits == 16 || bits == 24);
  const bool float_ok = format == kFormatFloat && bits == 32;
  if (!pcm_ok && !float_ok) {
    throw FormatError(where + ": unsupported codec " + std::to_string(format) + " with " +
                      std::to_string(bits) + " bits");
  }
  if (channels < 1 || channels > 2) {
    throw FormatError(where + ": unsupported channel count " + std::to_string(channels));
  }
  if (rate == 0) throw FormatError(where + ": zero sample rate");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  if (data_size % frame_bytes != 0) throw CorruptFileError(where + ": partial sample frame");
  const std::size_t frames = data_size / frame_bytes;

  auto decode = [&](const unsigned char* p) -> double {
    if (format == kFormatFloat) {
      float v;
      std::memcpy(&v, p, sizeof v);
      return static_cast<double>(v);
    }
    if (bits == 16) {
      return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    }
    std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
    if (v & 0x800000) v -= 0x1000000;
    return v / 8388608.0;
  };

  AudioClip clip;
  clip.id = path.stem().string();
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(static_cast<Eigen::Index>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    const unsigned char* p = data + f * frame_bytes;
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += decode(p + c * bytes_per_sample);
    acc /= channels;
    clip.samples[static_cast<Eigen::Index>(f)] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  if (target_rate != clip.sample_rate) clip = resample(clip, target_rate);
  return clip;
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path) {
  validate_clip(clip);
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, 2 * n);
  for (Eigen::Index i = 0; i < clip.samples.size(); ++i) {
    const double scaled = std::round(static_cast<double>(clip.samples[i]) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing " + path.string());
}

AudioClip resample(const AudioClip& clip, int new_rate) {
  if (new_rate <= 0) throw InvalidInputError("resample target rate must be positive");
  if (clip.sample_rate <= 0) throw InvalidInputError("clip '" + clip.id + "' has non-positive sample rate");
  if (new_rate == clip.sample_rate) return clip;

  const long in_rate = clip.sample_rate;
  const long g = std::gcd(in_rate, static_cast<long>(new_rate));
  const long up = new_rate / g;    // output phases per input period group
  const long down = in_rate / g;

  const double ratio = static_cast<double>(new_rate) / static_cast<double>(in_rate);
  const double scale = std::min(1.0, ratio);  // kernel compression when decimating
  const double half_width = kTapsPerSide / scale;  // in input samples
  const double inv_i0_beta = 1.0 / bessel_i0(kKaiserBeta);

  const Eigen::Index n_in = clip.samples.size();
  const auto n_out = static_cast<Eigen::Index>(std::llround(static_cast<double>(n_in) * ratio));
  const int span = static_cast<int>(std::ceil(half_width)) * 2 + 2;

  AudioClip out;
  out.id = clip.id;
  out.sample_rate = new_rate;
  out.samples.setZero(n_out);

  // Weights for one output sample whose position is `frac` input samples past `base`.
  auto fill_weights = [&](double frac, std::vector<double>& w) {
    w.assign(static_cast<std::size_t>(span), 0.0);
    const int first = -span / 2 + 1;
    double sum = 0.0;
    for (int k = 0; k < span; ++k) {
      const double x = (first + k - frac) * scale;
      w[static_cast<std::size_t>(k)] = kernel(x, inv_i0_beta);
      sum += w[static_cast<std::size_t>(k)];
    }
    // Unit DC gain.
    for (double& v : w) v /= sum;
  };

  const int first = -span / 2 + 1;
  auto apply = [&](Eigen::Index base, const std::vector<double>& w) {
    double acc = 0.0;
    for (int k = 0; k < span; ++k) {
      const Eigen::Index idx = base + first + k;
      if (idx >= 0 && idx < n_in) acc += w[static_cast<std::size_t>(k)] * clip.samples[idx];
    }
    return static_cast<float>(std::clamp(acc, -1.0, 1.0));
  };

  constexpr long kMaxPhases = 4096;
  if (up <= kMaxPhases) {
    // Polyphase: output m sits at input position m*down/up; its phase is (m*down) mod up.
    std::vector<std::vector<double>> table(static_cast<std::size_t>(up));
    for (long p = 0; p < up; ++p) {
      fill_weights(static_cast<double>(p) / static_cast<double>(up), table[static_cast<std::size_t>(p)]);
    }
    for (Eigen::Index m = 0; m < n_out; ++m) {
      const long long pos = static_cast<long long>(m) * down;
      out.samples[m] = apply(static_cast<Eigen::Index>(pos / up), table[static_cast<std::size_t>(pos % up)]);
    }
  } else {
    std::vector<double> w;
    for (Eigen::Index m = 0; m < n_out; ++m) {
      const double t = static_cast<double>(m) / ratio;
      const double base = std::floor(t);
      fill_weights(t - base, w);
      out.samples[m] = apply(static_cast<Eigen::Index>(base), w);
    }
  }
  return out;
}

}  // namespace mira
