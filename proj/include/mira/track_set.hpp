#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mira/audio_io.hpp"

namespace mira {

/// Produces a track's audio on demand; lets large sets stay off disk and
/// out of memory until features are extracted.
using AudioSource = std::function<AudioClip()>;

/// One track of an evaluation set. Audio comes from `source` when set,
/// otherwise from the `audio` file.
struct Track {
  std::string id;
  std::filesystem::path audio;
  AudioSource source;
  std::map<std::string, std::filesystem::path> embeddings;  // model_id -> MIRAEMB1
  std::map<std::string, std::filesystem::path> probs;       // model_id -> MIRAPRB1

  bool has_audio() const { return static_cast<bool>(source) || !audio.empty(); }

  /// Decodes the track at `rate`.
  AudioClip load_audio(int rate) const;
};

struct TrackSet {
  std::string set_id;
  std::vector<Track> tracks;
};

/// Reads {"set_id", "tracks": [{"id", "audio", "embeddings": {...}, "probs": {...}}]}.
/// Relative paths resolve against the manifest's directory. Duplicate ids
/// are a configuration error.
TrackSet load_track_set(const std::filesystem::path& manifest);

/// Writes a set manifest with paths relative to the manifest's directory.
void write_track_set(const TrackSet& set, const std::filesystem::path& manifest);

/// In-memory set from decoded clips (copied into shared storage).
TrackSet track_set_from_clips(std::string set_id, const std::vector<AudioClip>& clips);

}  // namespace mira
