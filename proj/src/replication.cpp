#include "mira/replication.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mira/error.hpp"
#include "mira/parallel.hpp"

namespace mira {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

AudioClip splice(const AudioClip& reference, const AudioClip& mixture, std::int64_t copy_start,
                 std::int64_t insert_at, std::int64_t len, const ReplicaOptions& options) {
  AudioClip out = mixture;
  out.samples.segment(insert_at, len) = reference.samples.segment(copy_start, len);

  const auto fade = std::min<std::int64_t>(
      len / 2, std::llround(options.crossfade_ms * reference.sample_rate / 1000.0));
  for (std::int64_t t = 0; t < fade; ++t) {
    const float a = static_cast<float>(t + 1) / static_cast<float>(fade + 1);
    const std::int64_t head = insert_at + t;
    const std::int64_t tail = insert_at + len - 1 - t;
    out.samples[head] = a * reference.samples[copy_start + t] + (1.0f - a) * mixture.samples[head];
    out.samples[tail] = a * reference.samples[copy_start + len - 1 - t] + (1.0f - a) * mixture.samples[tail];
  }
  return out;
}

}  // namespace

std::int64_t segment_length(const AudioClip& reference, double proportion) {
  return std::llround(proportion * static_cast<double>(reference.samples.size()));
}

std::pair<AudioClip, ReplicationSpec> make_replica(const AudioClip& reference, const AudioClip& mixture,
                                                   double proportion, std::mt19937_64& rng,
                                                   const ReplicaOptions& options) {
  if (!(proportion > 0.0 && proportion < 1.0)) {
    throw InvalidProportionError("proportion " + std::to_string(proportion) + " outside (0, 1)");
  }
  if (reference.sample_rate != mixture.sample_rate) {
    throw RateError("reference '" + reference.id + "' at " + std::to_string(reference.sample_rate) +
                    " Hz, mixture '" + mixture.id + "' at " + std::to_string(mixture.sample_rate) + " Hz");
  }
  const std::int64_t len = segment_length(reference, proportion);
  const auto ref_n = static_cast<std::int64_t>(reference.samples.size());
  const auto mix_n = static_cast<std::int64_t>(mixture.samples.size());
  if (len <= 0 || len > ref_n || len > mix_n) {
    throw InvalidProportionError("segment of " + std::to_string(len) + " samples does not fit reference '" +
                                 reference.id + "' (" + std::to_string(ref_n) + ") and mixture '" + mixture.id +
                                 "' (" + std::to_string(mix_n) + ")");
  }

  std::uniform_int_distribution<std::int64_t> copy_dist(0, ref_n - len);
  const std::int64_t copy_start = copy_dist(rng);
  std::uniform_int_distribution<std::int64_t> insert_dist(0, mix_n - len);
  const std::int64_t insert_at = insert_dist(rng);

  AudioClip out = splice(reference, mixture, copy_start, insert_at, len, options);

  ReplicationSpec spec;
  spec.reference_id = reference.id;
  spec.mixture_id = mixture.id;
  spec.proportion = proportion;
  spec.copy_start = copy_start;
  spec.insert_at = insert_at;
  spec.length = len;
  spec.copy_start_s = static_cast<double>(copy_start) / reference.sample_rate;
  spec.insert_at_s = static_cast<double>(insert_at) / mixture.sample_rate;
  return {std::move(out), std::move(spec)};
}

std::uint64_t replica_seed(std::uint64_t seed, std::size_t reference, std::size_t degree, std::size_t replica) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ static_cast<std::uint64_t>(reference));
  s = splitmix64(s ^ static_cast<std::uint64_t>(degree));
  return splitmix64(s ^ static_cast<std::uint64_t>(replica));
}

std::string replica_name(const std::string& reference_id, double proportion, int replica) {
  const double percent = proportion * 100.0;
  char buf[64];
  if (std::abs(percent - std::round(percent)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "_p%02lld_r%d", static_cast<long long>(std::llround(percent)), replica);
  } else {
    std::snprintf(buf, sizeof buf, "_p%g_r%d", percent, replica);
  }
  return reference_id + buf;
}

AudioClip render_replica(const ReplicationSpec& spec, const AudioClip& reference, const AudioClip& mixture,
                         const ReplicaOptions& options) {
  if (reference.sample_rate != mixture.sample_rate) throw RateError("reference and mixture rates differ");
  const auto ref_n = static_cast<std::int64_t>(reference.samples.size());
  const auto mix_n = static_cast<std::int64_t>(mixture.samples.size());
  if (spec.length <= 0 || spec.copy_start < 0 || spec.insert_at < 0 || spec.copy_start + spec.length > ref_n ||
      spec.insert_at + spec.length > mix_n) {
    throw InvalidInputError("splice window of '" + spec.replica_id + "' lies outside its clips");
  }
  AudioClip out = splice(reference, mixture, spec.copy_start, spec.insert_at, spec.length, options);
  out.id = spec.replica_id;
  return out;
}

CorpusManifest build_corpus_streaming(const std::vector<AudioClip>& references, const std::vector<AudioClip>& mixtures,
                                      const std::vector<double>& degrees, int replicas_per_song, std::uint64_t seed,
                                      const ReplicaSink& sink, const std::string& genre,
                                      const ReplicaOptions& options, unsigned workers) {
  if (references.empty()) throw ConfigError("reference set is empty");
  if (mixtures.empty()) throw ConfigError("mixture set is empty");
  if (degrees.empty()) throw ConfigError("no replication degrees given");
  if (replicas_per_song < 1) throw ConfigError("replicas per song must be at least 1");

  const std::size_t per_ref = degrees.size() * static_cast<std::size_t>(replicas_per_song);
  const std::size_t total = references.size() * per_ref;

  CorpusManifest manifest;
  manifest.genre = genre;
  manifest.degrees = degrees;
  manifest.replicas_per_song = replicas_per_song;
  manifest.seed = seed;
  manifest.crossfade_ms = options.crossfade_ms;
  manifest.specs.resize(total);

  parallel_for(total, workers, [&](std::size_t cell, unsigned) {
    const std::size_t r = cell / per_ref;
    const std::size_t d = (cell % per_ref) / static_cast<std::size_t>(replicas_per_song);
    const std::size_t k = cell % static_cast<std::size_t>(replicas_per_song);
    const std::uint64_t stream = replica_seed(seed, r, d, k);
    std::mt19937_64 rng(stream);
    std::uniform_int_distribution<std::size_t> pick(0, mixtures.size() - 1);
    const AudioClip& mixture = mixtures[pick(rng)];
    auto [clip, spec] = make_replica(references[r], mixture, degrees[d], rng, options);
    spec.replica_id = replica_name(references[r].id, degrees[d], static_cast<int>(k));
    spec.seed = stream;
    clip.id = spec.replica_id;
    manifest.specs[cell] = spec;
    sink(cell, std::move(clip), manifest.specs[cell]);
  });
  return manifest;
}

Corpus build_corpus(const std::vector<AudioClip>& references, const std::vector<AudioClip>& mixtures,
                    const std::vector<double>& degrees, int replicas_per_song, std::uint64_t seed,
                    const std::string& genre, const ReplicaOptions& options, unsigned workers) {
  Corpus corpus;
  const std::size_t total = references.size() * degrees.size() * static_cast<std::size_t>(std::max(0, replicas_per_song));
  corpus.replicas.resize(total);
  corpus.manifest = build_corpus_streaming(
      references, mixtures, degrees, replicas_per_song, seed,
      [&](std::size_t index, AudioClip&& clip, const ReplicationSpec&) { corpus.replicas[index] = std::move(clip); },
      genre, options, workers);
  return corpus;
}

nlohmann::json to_json(const CorpusManifest& manifest) {
  nlohmann::json specs = nlohmann::json::array();
  for (const auto& s : manifest.specs) {
    specs.push_back({{"reference_id", s.reference_id},
                     {"mixture_id", s.mixture_id},
                     {"replica_id", s.replica_id},
                     {"proportion", s.proportion},
                     {"copy_start_s", s.copy_start_s},
                     {"insert_at_s", s.insert_at_s},
                     {"seed", s.seed},
                     {"copy_start", s.copy_start},
                     {"insert_at", s.insert_at},
                     {"length", s.length}});
  }
  return {{"genre", manifest.genre},
          {"degrees", manifest.degrees},
          {"replicas_per_song", manifest.replicas_per_song},
          {"seed", manifest.seed},
          {"crossfade_ms", manifest.crossfade_ms},
          {"specs", std::move(specs)}};
}

CorpusManifest corpus_manifest_from_json(const nlohmann::json& doc) {
  try {
    CorpusManifest m;
    m.genre = doc.at("genre").get<std::string>();
    m.degrees = doc.at("degrees").get<std::vector<double>>();
    m.replicas_per_song = doc.at("replicas_per_song").get<int>();
    m.seed = doc.at("seed").get<std::uint64_t>();
    m.crossfade_ms = doc.value("crossfade_ms", 0.0);
    for (const auto& s : doc.at("specs")) {
      ReplicationSpec spec;
      spec.reference_id = s.at("reference_id").get<std::string>();
      spec.mixture_id = s.at("mixture_id").get<std::string>();
      spec.replica_id = s.at("replica_id").get<std::string>();
      spec.proportion = s.at("proportion").get<double>();
      spec.copy_start_s = s.at("copy_start_s").get<double>();
      spec.insert_at_s = s.at("insert_at_s").get<double>();
      spec.seed = s.value("seed", std::uint64_t{0});
      spec.copy_start = s.value("copy_start", std::int64_t{0});
      spec.insert_at = s.value("insert_at", std::int64_t{0});
      spec.length = s.value("length", std::int64_t{0});
      m.specs.push_back(std::move(spec));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corpus manifest: ") + e.what());
  }
}

}  // namespace mira
