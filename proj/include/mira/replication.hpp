#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mira/audio_io.hpp"

namespace mira {

/// Provenance of one splice: a window of the reference overwrites the mixture.
struct ReplicationSpec {
  std::string reference_id;
  std::string mixture_id;
  std::string replica_id;
  double proportion = 0.0;
  double copy_start_s = 0.0;
  double insert_at_s = 0.0;
  std::uint64_t seed = 0;

  // Sample-level view of the same window.
  std::int64_t copy_start = 0;
  std::int64_t insert_at = 0;
  std::int64_t length = 0;

  bool operator==(const ReplicationSpec&) const = default;
};

struct CorpusManifest {
  std::string genre;
  std::vector<double> degrees;
  int replicas_per_song = 0;
  std::uint64_t seed = 0;
  double crossfade_ms = 0.0;
  std::vector<ReplicationSpec> specs;

  bool operator==(const CorpusManifest&) const = default;
};

struct Corpus {
  CorpusManifest manifest;
  std::vector<AudioClip> replicas;  // parallel to manifest.specs
};

struct ReplicaOptions {
  double crossfade_ms = 0.0;
};

/// Number of samples copied for `proportion` of the reference.
std::int64_t segment_length(const AudioClip& reference, double proportion);

/// Overwrites a uniformly placed window of `mixture` with a uniformly placed
/// window of `reference` of length proportion * reference duration. The
/// output has the mixture's length. Spliced samples are bit-identical to the
/// reference unless a crossfade is requested.
std::pair<AudioClip, ReplicationSpec> make_replica(const AudioClip& reference, const AudioClip& mixture,
                                                   double proportion, std::mt19937_64& rng,
                                                   const ReplicaOptions& options = {});

/// Seed of the independent stream for one (reference, degree, replica) cell.
std::uint64_t replica_seed(std::uint64_t seed, std::size_t reference, std::size_t degree, std::size_t replica);

/// Replica id, e.g. "song01_p05_r3".
std::string replica_name(const std::string& reference_id, double proportion, int replica);

/// Re-applies a recorded splice. Equal to the clip make_replica produced.
AudioClip render_replica(const ReplicationSpec& spec, const AudioClip& reference, const AudioClip& mixture,
                         const ReplicaOptions& options = {});

/// Receives each replica as it is built; may be called from several workers at once.
using ReplicaSink = std::function<void(std::size_t index, AudioClip&& clip, const ReplicationSpec& spec)>;

/// Builds the corpus without holding the replicas; each is handed to `sink`.
CorpusManifest build_corpus_streaming(const std::vector<AudioClip>& references, const std::vector<AudioClip>& mixtures,
                                      const std::vector<double>& degrees, int replicas_per_song, std::uint64_t seed,
                                      const ReplicaSink& sink, const std::string& genre = "unlabelled",
                                      const ReplicaOptions& options = {}, unsigned workers = 1);

/// |references| * |degrees| * replicas_per_song replicas, each against a mixture
/// drawn with replacement. Deterministic in `seed` for any worker count.
Corpus build_corpus(const std::vector<AudioClip>& references, const std::vector<AudioClip>& mixtures,
                    const std::vector<double>& degrees, int replicas_per_song, std::uint64_t seed,
                    const std::string& genre = "unlabelled", const ReplicaOptions& options = {},
                    unsigned workers = 1);

nlohmann::json to_json(const CorpusManifest& manifest);
CorpusManifest corpus_manifest_from_json(const nlohmann::json& doc);

}  // namespace mira
