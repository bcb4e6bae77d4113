#include "mira/track_set.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "mira/error.hpp"

namespace mira {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string relative_to(const fs::path& path, const fs::path& base) {
  if (path.empty()) return {};
  const fs::path rel = fs::absolute(path).lexically_relative(fs::absolute(base));
  return rel.empty() ? path.generic_string() : rel.generic_string();
}

}  // namespace

TrackSet load_track_set(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ConfigError("cannot open set manifest " + manifest.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(manifest.string() + ": " + e.what());
  }
  const fs::path base = manifest.parent_path();
  TrackSet set;
  std::set<std::string> seen;
  try {
    set.set_id = doc.at("set_id").get<std::string>();
    for (const auto& t : doc.at("tracks")) {
      Track track;
      track.id = t.at("id").get<std::string>();
      if (!seen.insert(track.id).second) {
        throw ConfigError(manifest.string() + ": duplicate track id '" + track.id + "'");
      }
      if (t.contains("audio") && !t["audio"].is_null()) track.audio = resolve(base, t["audio"].get<std::string>());
      if (t.contains("embeddings")) {
        for (const auto& [model, p] : t["embeddings"].items()) track.embeddings[model] = resolve(base, p.get<std::string>());
      }
      if (t.contains("probs")) {
        for (const auto& [model, p] : t["probs"].items()) track.probs[model] = resolve(base, p.get<std::string>());
      }
      set.tracks.push_back(std::move(track));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(manifest.string() + ": " + e.what());
  }
  return set;
}

void write_track_set(const TrackSet& set, const fs::path& manifest) {
  const fs::path base = manifest.parent_path().empty() ? fs::path(".") : manifest.parent_path();
  nlohmann::json tracks = nlohmann::json::array();
  for (const auto& t : set.tracks) {
    nlohmann::json entry{{"id", t.id}};
    if (!t.audio.empty()) entry["audio"] = relative_to(t.audio, base);
    nlohmann::json emb = nlohmann::json::object();
    for (const auto& [model, p] : t.embeddings) emb[model] = relative_to(p, base);
    nlohmann::json probs = nlohmann::json::object();
    for (const auto& [model, p] : t.probs) probs[model] = relative_to(p, base);
    entry["embeddings"] = std::move(emb);
    entry["probs"] = std::move(probs);
    tracks.push_back(std::move(entry));
  }
  const nlohmann::json doc{{"set_id", set.set_id}, {"tracks", std::move(tracks)}};
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
}

AudioClip Track::load_audio(int rate) const {
  if (source) {
    AudioClip clip = source();
    if (clip.sample_rate != rate) clip = resample(clip, rate);
    clip.id = id;
    return clip;
  }
  if (audio.empty()) throw ConfigError("track '" + id + "' has no audio");
  AudioClip clip = load_wav(audio, rate);
  clip.id = id;
  return clip;
}

TrackSet track_set_from_clips(std::string set_id, const std::vector<AudioClip>& clips) {
  TrackSet set;
  set.set_id = std::move(set_id);
  for (const auto& c : clips) {
    Track t;
    t.id = c.id;
    auto shared = std::make_shared<const AudioClip>(c);
    t.source = [shared] { return *shared; };
    set.tracks.push_back(std::move(t));
  }
  return set;
}

}  // namespace mira
