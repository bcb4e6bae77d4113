#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>

#include "mira/error.hpp"
#include "mira/evaluator.hpp"
#include "mira/replication.hpp"
#include "mira/track_set.hpp"

namespace mira::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(const std::string& list, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  for (char c : list) {
    if (c == sep) {
      if (!item.empty()) out.push_back(item);
      item.clear();
    } else if (c != ' ') {
      item += c;
    }
  }
  if (!item.empty()) out.push_back(item);
  return out;
}

std::pair<std::string, std::string> key_value(const std::string& arg, const char* what) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
    throw ConfigError(std::string(what) + " must look like METRIC=VALUE, got '" + arg + "'");
  }
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": '" + text + "' is not a number");
  }
}

std::vector<fs::path> wav_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (entry.is_regular_file() && ext == ".wav") files.push_back(fs::absolute(entry.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// Audio inputs for synth: a directory of .wav files (id = file stem) or a set manifest.
std::vector<AudioClip> load_clips(const fs::path& input, int rate) {
  std::vector<AudioClip> clips;
  if (fs::is_directory(input)) {
    for (const auto& f : wav_files(input)) {
      AudioClip clip = load_wav(f, rate);
      clip.id = f.stem().string();
      clips.push_back(std::move(clip));
    }
  } else if (fs::is_regular_file(input)) {
    for (const Track& t : load_track_set(input).tracks) clips.push_back(t.load_audio(rate));
  } else {
    throw ConfigError("no such directory or manifest: " + input.string());
  }
  if (clips.empty()) throw ConfigError("no audio found in " + input.string());
  return clips;
}

TrackSet set_from_directory_or_manifest(const fs::path& input, const std::string& set_id) {
  if (!fs::is_directory(input)) {
    TrackSet set = load_track_set(input);
    for (auto& t : set.tracks) {
      if (!t.audio.empty()) t.audio = fs::absolute(t.audio);
    }
    return set;
  }
  TrackSet set;
  set.set_id = set_id;
  for (const auto& f : wav_files(input)) {
    Track t;
    t.id = f.stem().string();
    t.audio = f;
    set.tracks.push_back(std::move(t));
  }
  return set;
}

void print_global(const EvaluationReport& report, std::ostream& out) {
  for (const auto& g : report.global) {
    char line[256];
    if (g.value) {
      std::snprintf(line, sizeof line, "%-12s %-10s %-9s value=%.6g%s\n", g.metric.c_str(), g.comparison.c_str(),
                    g.model.c_str(), *g.value, g.experimental ? " (experimental)" : "");
    } else {
      std::snprintf(line, sizeof line, "%-12s %-10s %-9s mean=%.6g std=%.6g n=%zu\n", g.metric.c_str(),
                    g.comparison.c_str(), g.model.c_str(), g.summary.mean, g.summary.std, g.summary.n);
    }
    out << line;
  }
  if (report.stats) {
    for (const auto& m : report.stats->metrics) {
      char line[256];
      std::snprintf(line, sizeof line, "%-12s kruskal-wallis H=%.4f df=%d p=%.3g\n", m.metric.c_str(), m.omnibus.h,
                    m.omnibus.df, m.omnibus.p_value);
      out << line;
    }
  }
  if (!report.errors.empty()) out << report.errors.size() << " pair evaluation(s) failed; see report.json\n";
  if (!report.flags.empty()) out << report.flags.size() << " pair(s) flagged\n";
}

struct EvalOptions {
  std::string metrics;
  std::vector<std::string> bindings;
  std::vector<std::string> thresholds;
  unsigned workers = 0;
  bool include_self = false;
  std::uint64_t seed = 0;
  int sample_rate = kDefaultSampleRate;
  std::string formats = "csv,json,svg";
  std::string out;
};

void add_eval_options(CLI::App& cmd, EvalOptions& o) {
  cmd.add_option("--metrics", o.metrics, "Comma-separated: coverid,kl,clap_cos,defnet_cos,builtin_cos,fad")->required();
  cmd.add_option("--bind", o.bindings, "Model binding METRIC=MODEL (repeatable)");
  cmd.add_option("--threshold", o.thresholds, "Flag pairs beyond METRIC=VALUE (repeatable)");
  cmd.add_option("--workers", o.workers, "Worker threads (0 = all cores)");
  cmd.add_flag("--include-self-pairs", o.include_self, "Score pairs with equal ids");
  cmd.add_option("--seed", o.seed, "Run seed, echoed in provenance");
  cmd.add_option("--sample-rate", o.sample_rate, "Analysis rate in Hz");
  cmd.add_option("--formats", o.formats, "Subset of csv,json,svg");
  cmd.add_option("--out", o.out, "Output directory")->required();
}

EvaluationConfig config_from(const EvalOptions& o) {
  EvaluationConfig config;
  config.metrics = split(o.metrics);
  for (const auto& b : o.bindings) {
    auto [metric, model] = key_value(b, "--bind");
    config.bindings[metric] = model;
  }
  for (const auto& t : o.thresholds) {
    auto [metric, value] = key_value(t, "--threshold");
    config.thresholds[metric] = parse_number(value, "--threshold " + metric);
  }
  config.workers = o.workers;
  config.include_self_pairs = o.include_self;
  config.seed = o.seed;
  if (o.sample_rate <= 0) throw ConfigError("--sample-rate must be positive");
  config.sample_rate = o.sample_rate;
  return config;
}

void emit(const EvaluationReport& report, const fs::path& out_dir, const std::string& formats, std::ostream& out) {
  const auto parsed = parse_formats(formats);
  print_global(report, out);
  for (const auto& path : write_report(report, out_dir, parsed)) out << "wrote " << path.generic_string() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"mira: music replication assessment"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kEngineVersion));

  // synth
  auto* synth = app.add_subcommand("synth", "Build a replication corpus");
  std::string synth_ref, synth_mix, synth_out, degrees_arg = "5,10,15,25,50", genre = "unlabelled";
  int replicas = 10;
  std::uint64_t synth_seed = 0;
  double crossfade_ms = 0.0;
  unsigned synth_workers = 0;
  int synth_rate = kDefaultSampleRate;
  synth->add_option("--reference", synth_ref, "Directory of reference WAVs or a set manifest")->required();
  synth->add_option("--mixture", synth_mix, "Directory of mixture WAVs or a set manifest")->required();
  synth->add_option("--degrees", degrees_arg, "Replication degrees in percent");
  synth->add_option("--replicas", replicas, "Replicas per reference and degree");
  synth->add_option("--seed", synth_seed, "Corpus seed");
  synth->add_option("--crossfade-ms", crossfade_ms, "Linear crossfade at splice edges");
  synth->add_option("--genre", genre, "Genre label recorded in the manifest");
  synth->add_option("--workers", synth_workers, "Worker threads (0 = all cores)");
  synth->add_option("--sample-rate", synth_rate, "Corpus rate in Hz");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score reference x target pairs");
  std::string eval_ref, eval_tgt, eval_ctl;
  EvalOptions eval_opts;
  eval->add_option("--reference", eval_ref, "Reference set manifest")->required();
  eval->add_option("--target", eval_tgt, "Target set manifest")->required();
  eval->add_option("--control", eval_ctl, "Control set manifest");
  add_eval_options(*eval, eval_opts);

  // stats
  auto* stats = app.add_subcommand("stats", "Sensitivity experiment over a replication corpus");
  std::string corpus_path;
  EvalOptions stats_opts;
  stats->add_option("--corpus", corpus_path, "corpus.json written by synth")->required();
  add_eval_options(*stats, stats_opts);

  // report
  auto* report_cmd = app.add_subcommand("report", "Re-emit report files from a run");
  std::string report_in, report_out, report_formats = "csv,json,svg";
  report_cmd->add_option("--in", report_in, "Run directory or report.json")->required();
  report_cmd->add_option("--out", report_out, "Output directory (default: the run directory)");
  report_cmd->add_option("--formats", report_formats, "Subset of csv,json,svg");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kEngineVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "mira: " << e.what() << '\n';
    return 2;
  }

  try {
    if (synth->parsed()) {
      std::vector<double> degrees;
      for (const auto& d : split(degrees_arg)) {
        const double percent = parse_number(d, "--degrees");
        if (!(percent > 0.0 && percent < 100.0)) throw ConfigError("degree " + d + "% outside (0, 100)");
        degrees.push_back(percent / 100.0);
      }
      const fs::path out_dir = synth_out;
      fs::create_directories(out_dir / "replicas");
      const auto references = load_clips(synth_ref, synth_rate);
      const auto mixtures = load_clips(synth_mix, synth_rate);

      std::vector<Track> replica_tracks(references.size() * degrees.size() *
                                        static_cast<std::size_t>(std::max(0, replicas)));
      const CorpusManifest manifest = build_corpus_streaming(
          references, mixtures, degrees, replicas, synth_seed,
          [&](std::size_t index, AudioClip&& clip, const ReplicationSpec& spec) {
            const fs::path file = out_dir / "replicas" / (spec.replica_id + ".wav");
            save_wav(clip, file);
            replica_tracks[index].id = spec.replica_id;
            replica_tracks[index].audio = fs::absolute(file);
          },
          genre, ReplicaOptions{crossfade_ms}, synth_workers);

      TrackSet ref_set = set_from_directory_or_manifest(synth_ref, "references");
      TrackSet rep_set{"replicas", std::move(replica_tracks)};
      write_track_set(ref_set, out_dir / "reference_set.json");
      write_track_set(rep_set, out_dir / "replica_set.json");
      nlohmann::json doc = to_json(manifest);
      doc["reference_set"] = "reference_set.json";
      doc["replica_set"] = "replica_set.json";
      std::ofstream(out_dir / "corpus.json") << doc.dump(2) << '\n';
      out << manifest.specs.size() << " replicas written to " << (out_dir / "replicas").generic_string() << '\n';
      return 0;
    }

    if (eval->parsed()) {
      EvaluationConfig config = config_from(eval_opts);
      config.reference_manifest = eval_ref;
      config.target_manifest = eval_tgt;
      if (!eval_ctl.empty()) config.control_manifest = fs::path(eval_ctl);
      emit(evaluate_pairwise(config), eval_opts.out, eval_opts.formats, out);
      return 0;
    }

    if (stats->parsed()) {
      EvaluationConfig config = config_from(stats_opts);
      const fs::path corpus_file = corpus_path;
      std::ifstream in(corpus_file);
      if (!in) throw ConfigError("cannot open corpus manifest " + corpus_file.string());
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(corpus_file.string() + ": " + e.what());
      }
      const CorpusManifest manifest = corpus_manifest_from_json(doc);
      const fs::path base = corpus_file.parent_path();
      config.reference_manifest = base / doc.value("reference_set", std::string("reference_set.json"));
      config.target_manifest = base / doc.value("replica_set", std::string("replica_set.json"));
      const TrackSet references = load_track_set(config.reference_manifest);
      const TrackSet replica_set = load_track_set(config.target_manifest);
      emit(sensitivity_experiment(manifest, references, replica_set, config), stats_opts.out, stats_opts.formats, out);
      return 0;
    }

    if (report_cmd->parsed()) {
      const fs::path in = report_in;
      const fs::path json_file = fs::is_directory(in) ? in / "report.json" : in;
      const fs::path out_dir = report_out.empty() ? json_file.parent_path() : fs::path(report_out);
      const EvaluationReport report = read_report(json_file);
      for (const auto& path : write_report(report, out_dir, parse_formats(report_formats))) {
        out << "wrote " << path.generic_string() << '\n';
      }
      return 0;
    }
  } catch (const Error& e) {
    err << "mira: " << e.what() << '\n';
    return exit_code_for(e.error_class());
  } catch (const fs::filesystem_error& e) {
    err << "mira: " << e.what() << '\n';
    return exit_code_for(ErrorClass::kData);
  }
  return 2;
}

}  // namespace mira::cli
