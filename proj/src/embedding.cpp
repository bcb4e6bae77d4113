#include "mira/embedding.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace mira {

namespace {

constexpr char kEmbeddingMagic[] = "MIRAEMB1";
constexpr char kProbMagic[] = "MIRAPRB1";
constexpr std::size_t kHeaderBytes = 16;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

Eigen::MatrixXf read_matrix(const std::filesystem::path& path, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kHeaderBytes) throw CorruptFileError(path.string() + ": header truncated");
  if (std::memcmp(bytes.data(), magic, 8) != 0) {
    throw FormatError(path.string() + ": bad magic, expected " + magic);
  }
  const std::uint32_t cols = read_u32(bytes.data() + 8);
  const std::uint32_t rows = read_u32(bytes.data() + 12);
  const std::size_t expected = kHeaderBytes + static_cast<std::size_t>(rows) * cols * 4;
  if (bytes.size() < expected) throw CorruptFileError(path.string() + ": payload truncated");
  if (bytes.size() > expected) throw FormatError(path.string() + ": trailing bytes after payload");
  if (cols == 0) throw FormatError(path.string() + ": zero dimension");

  Eigen::MatrixXf m(rows, cols);
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::uint32_t bits = read_u32(p);
      float v;
      std::memcpy(&v, &bits, sizeof v);
      if (!std::isfinite(v)) throw FormatError(path.string() + ": non-finite value");
      m(r, c) = v;
      p += 4;
    }
  }
  return m;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXf& m, const char* magic) {
  std::vector<unsigned char> out(magic, magic + 8);
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float v = m(r, c);
      std::uint32_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      put_u32(out, bits);
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("failed writing " + path.string());
}

ProbDistribution smoothed(const ProbDistribution& p, double eps) {
  ProbDistribution s;
  s.probs = p.probs.array() + eps;
  s.probs /= s.probs.sum();
  return s;
}

}  // namespace

void EmbeddingSet::add(const std::string& track_id, Eigen::MatrixXf frames) {
  if (!frames.allFinite()) throw FormatError("track '" + track_id + "' has non-finite embedding values");
  if (entries.empty() && dim == 0) {
    dim = frames.cols();
  } else if (frames.cols() != dim) {
    throw FormatError("dimension mismatch in model '" + model_id + "': track '" + track_id + "' has D=" +
                      std::to_string(frames.cols()) + ", expected D=" + std::to_string(dim));
  }
  entries[track_id] = std::move(frames);
}

ProbDistribution ProbDistribution::from(Eigen::VectorXd probs) {
  if (probs.size() == 0) throw EmptyInputError("empty probability distribution");
  if (!probs.allFinite() || (probs.array() < 0.0).any()) {
    throw InvalidInputError("probabilities must be finite and non-negative");
  }
  if (std::abs(probs.sum() - 1.0) > kProbSumTolerance) {
    throw InvalidInputError("probabilities sum to " + std::to_string(probs.sum()));
  }
  return ProbDistribution{std::move(probs)};
}

Eigen::MatrixXf read_embedding_file(const std::filesystem::path& path) { return read_matrix(path, kEmbeddingMagic); }

void write_embedding_file(const std::filesystem::path& path, const Eigen::MatrixXf& frames) {
  write_matrix(path, frames, kEmbeddingMagic);
}

Eigen::MatrixXf read_prob_file(const std::filesystem::path& path) {
  Eigen::MatrixXf rows = read_matrix(path, kProbMagic);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    if ((rows.row(r).array() < 0.0f).any()) throw FormatError(path.string() + ": negative probability");
    const double sum = rows.row(r).cast<double>().sum();
    if (std::abs(sum - 1.0) > kProbSumTolerance) {
      throw FormatError(path.string() + ": row " + std::to_string(r) + " sums to " + std::to_string(sum));
    }
  }
  return rows;
}

void write_prob_file(const std::filesystem::path& path, const Eigen::MatrixXf& rows) {
  write_matrix(path, rows, kProbMagic);
}

EmbeddingSet load_embedding_set(const std::filesystem::path& manifest, const std::string& model_id) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("tracks") || !doc["tracks"].is_object()) {
    throw FormatError(manifest.string() + ": expected {\"model_id\", \"tracks\": {...}}");
  }
  const std::string declared = doc.value("model_id", std::string{});
  if (declared != model_id) {
    throw ConfigError(manifest.string() + " declares model '" + declared + "', requested '" + model_id + "'");
  }

  EmbeddingSet set;
  set.model_id = model_id;
  const auto base = manifest.parent_path();
  for (const auto& [track_id, rel] : doc["tracks"].items()) {
    const std::filesystem::path file = base / rel.get<std::string>();
    if (!std::filesystem::exists(file)) {
      throw MissingEntryError("track '" + track_id + "' file " + file.string() + " not found");
    }
    set.add(track_id, read_embedding_file(file));
  }
  return set;
}

double kl_divergence(const ProbDistribution& p, const ProbDistribution& q, double eps) {
  if (p.size() != q.size()) {
    throw DimensionError("KL over distributions of length " + std::to_string(p.size()) + " and " +
                         std::to_string(q.size()));
  }
  const ProbDistribution ps = smoothed(p, eps);
  const ProbDistribution qs = smoothed(q, eps);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < ps.size(); ++i) sum += ps.probs[i] * std::log(ps.probs[i] / qs.probs[i]);
  return sum;
}

double symmetric_kl(const ProbDistribution& p, const ProbDistribution& q, double eps) {
  const double forward = kl_divergence(p, q, eps);
  const double backward = kl_divergence(q, p, eps);
  return 0.5 * (forward + backward);
}

ProbDistribution builtin_distribution(const Chromagram& chroma) {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kPitchClasses);
  if (!chroma.empty()) mean = chroma.frames.cast<double>().colwise().mean().transpose();
  const double total = mean.sum();
  if (total <= 0.0) return ProbDistribution{Eigen::VectorXd::Constant(kPitchClasses, 1.0 / kPitchClasses)};
  return ProbDistribution{mean / total};
}

ProbDistribution distribution_from_rows(const Eigen::MatrixXf& rows) {
  if (rows.rows() == 0) throw EmptyInputError("probability file has no rows");
  Eigen::VectorXd mean = rows.cast<double>().colwise().mean().transpose();
  return ProbDistribution::from(mean / mean.sum());
}

}  // namespace mira
