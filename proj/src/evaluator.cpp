#include "mira/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>

#include "mira/error.hpp"
#include "mira/fad.hpp"
#include "mira/parallel.hpp"

namespace mira {

namespace fs = std::filesystem;

const std::vector<MetricInfo>& metric_registry() {
  static const std::vector<MetricInfo> registry = {
      {"coverid", MetricFamily::kCover, false, ""},
      {"kl", MetricFamily::kDistribution, false, "passt"},
      {"clap_cos", MetricFamily::kEmbedding, true, "clap"},
      {"defnet_cos", MetricFamily::kEmbedding, true, "defnet"},
      {"builtin_cos", MetricFamily::kEmbedding, true, std::string(kBuiltinModel)},
      {"fad", MetricFamily::kSet, false, "clap"},
  };
  return registry;
}

const MetricInfo& metric_info(std::string_view name) {
  for (const auto& m : metric_registry()) {
    if (m.name == name) return m;
  }
  throw ConfigError("unknown metric '" + std::string(name) + "'");
}

std::string EvaluationConfig::binding(const std::string& metric) const {
  const MetricInfo& info = metric_info(metric);
  if (info.family == MetricFamily::kCover) return {};
  if (auto it = bindings.find(metric); it != bindings.end()) return it->second;
  return info.default_binding;
}

namespace {

struct TrackFeatures {
  std::optional<ClipFeatures> audio;
  std::string audio_error;
  std::map<std::string, Eigen::MatrixXf> embeddings;
  std::map<std::string, std::string> embedding_errors;
  std::map<std::string, ProbDistribution> probs;
  std::map<std::string, std::string> prob_errors;
};

/// Per-metric inputs for one set, one slot per track.
struct MetricInputs {
  std::vector<std::optional<Eigen::VectorXd>> pooled;
  std::vector<std::optional<ProbDistribution>> dists;
  std::vector<std::string> errors;
};

struct SetFeatures {
  const TrackSet* set = nullptr;
  std::vector<TrackFeatures> tracks;
  std::map<std::string, MetricInputs> inputs;  // keyed by metric
};

struct FeaturePlan {
  bool audio = false;
  std::set<std::string> embedding_models;
  std::set<std::string> prob_models;
};

std::vector<const MetricInfo*> resolve_metrics(const EvaluationConfig& config) {
  if (config.metrics.empty()) throw ConfigError("no metrics requested");
  std::vector<const MetricInfo*> out;
  std::set<std::string> seen;
  for (const auto& name : config.metrics) {
    const MetricInfo& info = metric_info(name);
    if (seen.insert(name).second) out.push_back(&info);
  }
  for (const auto& [metric, model] : config.bindings) {
    metric_info(metric);
    if (model.empty()) throw ConfigError("empty model binding for metric '" + metric + "'");
  }
  for (const auto& [metric, cutoff] : config.thresholds) {
    const MetricInfo& info = metric_info(metric);
    if (!seen.count(metric)) throw ConfigError("threshold given for metric '" + metric + "' which is not evaluated");
    if (info.family == MetricFamily::kSet) throw ConfigError("metric 'fad' is set-level and cannot flag pairs");
    if (std::isnan(cutoff)) throw ConfigError("threshold for '" + metric + "' is NaN");
  }
  return out;
}

FeaturePlan plan_features(const std::vector<const MetricInfo*>& metrics, const EvaluationConfig& config) {
  FeaturePlan plan;
  for (const MetricInfo* m : metrics) {
    const std::string model = config.binding(m->name);
    switch (m->family) {
      case MetricFamily::kCover:
        plan.audio = true;
        break;
      case MetricFamily::kDistribution:
        if (model == kBuiltinModel) plan.audio = true; else plan.prob_models.insert(model);
        break;
      case MetricFamily::kEmbedding:
      case MetricFamily::kSet:
        if (model == kBuiltinModel) plan.audio = true; else plan.embedding_models.insert(model);
        break;
    }
  }
  return plan;
}

/// Missing bindings are configuration errors, unreadable files are not.
void validate_bindings(const TrackSet& set, const std::vector<const MetricInfo*>& metrics,
                       const EvaluationConfig& config) {
  for (const MetricInfo* m : metrics) {
    const std::string model = config.binding(m->name);
    for (const Track& t : set.tracks) {
      const bool needs_audio = m->family == MetricFamily::kCover || model == kBuiltinModel;
      if (needs_audio) {
        if (!t.has_audio()) {
          throw ConfigError("metric '" + m->name + "' needs audio but track '" + t.id + "' of set '" + set.set_id +
                            "' has none");
        }
      } else if (m->family == MetricFamily::kDistribution) {
        if (!t.probs.count(model)) {
          throw ConfigError("metric '" + m->name + "' is bound to model '" + model + "' but track '" + t.id +
                            "' of set '" + set.set_id + "' has no probs entry for it");
        }
      } else if (!t.embeddings.count(model)) {
        throw ConfigError("metric '" + m->name + "' is bound to model '" + model + "' but track '" + t.id +
                          "' of set '" + set.set_id + "' has no embeddings entry for it");
      }
    }
  }
}

SetFeatures extract_set(const TrackSet& set, const std::vector<const MetricInfo*>& metrics,
                        const EvaluationConfig& config) {
  validate_bindings(set, metrics, config);
  const FeaturePlan plan = plan_features(metrics, config);
  SetFeatures out;
  out.set = &set;
  out.tracks.resize(set.tracks.size());

  // Each slot is written by exactly one worker.
  parallel_for(set.tracks.size(), config.workers, [&](std::size_t i, unsigned) {
    const Track& track = set.tracks[i];
    TrackFeatures& f = out.tracks[i];
    if (plan.audio) {
      try {
        f.audio = extract_features(track.load_audio(config.sample_rate), config.hpcp);
      } catch (const Error& e) {
        f.audio_error = e.what();
      }
    }
    for (const auto& model : plan.embedding_models) {
      try {
        f.embeddings[model] = read_embedding_file(track.embeddings.at(model));
      } catch (const Error& e) {
        f.embedding_errors[model] = e.what();
      }
    }
    for (const auto& model : plan.prob_models) {
      try {
        f.probs.emplace(model, distribution_from_rows(read_prob_file(track.probs.at(model))));
      } catch (const Error& e) {
        f.prob_errors[model] = e.what();
      }
    }
  });

  for (const MetricInfo* m : metrics) {
    if (m->family == MetricFamily::kCover || m->family == MetricFamily::kSet) continue;
    const std::string model = config.binding(m->name);
    MetricInputs in;
    in.pooled.resize(set.tracks.size());
    in.dists.resize(set.tracks.size());
    in.errors.resize(set.tracks.size());
    for (std::size_t i = 0; i < set.tracks.size(); ++i) {
      const TrackFeatures& f = out.tracks[i];
      try {
        if (m->family == MetricFamily::kDistribution) {
          if (model == kBuiltinModel) {
            if (!f.audio) throw DegenerateInputError(f.audio_error);
            in.dists[i] = builtin_distribution(f.audio->chroma);
          } else {
            if (auto it = f.prob_errors.find(model); it != f.prob_errors.end()) throw DegenerateInputError(it->second);
            in.dists[i] = f.probs.at(model);
          }
        } else {
          const Eigen::MatrixXf* frames = nullptr;
          if (model == kBuiltinModel) {
            if (!f.audio) throw DegenerateInputError(f.audio_error);
            frames = &f.audio->embedding;
          } else {
            if (auto it = f.embedding_errors.find(model); it != f.embedding_errors.end()) {
              throw DegenerateInputError(it->second);
            }
            frames = &f.embeddings.at(model);
          }
          in.pooled[i] = aggregate_track(*frames).cast<double>();
        }
      } catch (const Error& e) {
        in.errors[i] = std::string("track '") + set.tracks[i].id + "': " + e.what();
      }
    }
    out.inputs.emplace(m->name, std::move(in));
  }
  return out;
}

struct PairTask {
  std::size_t ref;
  std::size_t tgt;
};

struct Outcome {
  std::optional<double> value;
  std::string error;
};

double score_pair(const MetricInfo& m, const SetFeatures& ref, const SetFeatures& tgt, const PairTask& task,
                  const EvaluationConfig& config, CoverIdWorkspace& work) {
  switch (m.family) {
    case MetricFamily::kCover: {
      const TrackFeatures& a = ref.tracks[task.ref];
      const TrackFeatures& b = tgt.tracks[task.tgt];
      if (!a.audio) throw DegenerateInputError(a.audio_error);
      if (!b.audio) throw DegenerateInputError(b.audio_error);
      return coverid_distance(a.audio->chroma, b.audio->chroma, config.coverid, work);
    }
    case MetricFamily::kDistribution: {
      const MetricInputs& a = ref.inputs.at(m.name);
      const MetricInputs& b = tgt.inputs.at(m.name);
      if (!a.errors[task.ref].empty()) throw DegenerateInputError(a.errors[task.ref]);
      if (!b.errors[task.tgt].empty()) throw DegenerateInputError(b.errors[task.tgt]);
      return symmetric_kl(*a.dists[task.ref], *b.dists[task.tgt], config.kl_epsilon);
    }
    case MetricFamily::kEmbedding: {
      const MetricInputs& a = ref.inputs.at(m.name);
      const MetricInputs& b = tgt.inputs.at(m.name);
      if (!a.errors[task.ref].empty()) throw DegenerateInputError(a.errors[task.ref]);
      if (!b.errors[task.tgt].empty()) throw DegenerateInputError(b.errors[task.tgt]);
      return cosine_score(*a.pooled[task.ref], *b.pooled[task.tgt]);
    }
    case MetricFamily::kSet:
      break;
  }
  throw ConfigError("metric '" + m.name + "' has no per-pair form");
}

struct ScoredPairs {
  std::vector<PairScore> scores;
  std::vector<PairError> errors;
  std::size_t attempted = 0;
};

ScoredPairs score_tasks(const SetFeatures& ref, const SetFeatures& tgt, const std::vector<PairTask>& tasks,
                        const std::vector<const MetricInfo*>& metrics, const EvaluationConfig& config) {
  std::vector<const MetricInfo*> pair_metrics;
  for (const MetricInfo* m : metrics) {
    if (m->family != MetricFamily::kSet) pair_metrics.push_back(m);
  }
  const std::size_t mcount = pair_metrics.size();
  std::vector<Outcome> outcomes(tasks.size() * mcount);
  const unsigned workers = std::min<unsigned>(resolve_workers(config.workers),
                                              static_cast<unsigned>(std::max<std::size_t>(1, tasks.size())));
  std::vector<CoverIdWorkspace> workspaces(workers);

  parallel_for(tasks.size(), workers, [&](std::size_t t, unsigned w) {
    for (std::size_t k = 0; k < mcount; ++k) {
      Outcome& o = outcomes[t * mcount + k];
      try {
        const double v = score_pair(*pair_metrics[k], ref, tgt, tasks[t], config, workspaces[w]);
        if (!std::isfinite(v)) throw DegenerateInputError("non-finite score");
        o.value = v;
      } catch (const Error& e) {
        o.error = e.what();
      }
    }
  });

  ScoredPairs out;
  out.attempted = outcomes.size();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const std::string& rid = ref.set->tracks[tasks[t].ref].id;
    const std::string& tid = tgt.set->tracks[tasks[t].tgt].id;
    for (std::size_t k = 0; k < mcount; ++k) {
      const Outcome& o = outcomes[t * mcount + k];
      if (o.value) {
        out.scores.push_back({rid, tid, pair_metrics[k]->name, *o.value, pair_metrics[k]->higher_is_similar});
      } else {
        out.errors.push_back({rid, tid, pair_metrics[k]->name, o.error});
      }
    }
  }
  return out;
}

void sort_scores(std::vector<PairScore>& v) {
  std::sort(v.begin(), v.end(), [](const PairScore& a, const PairScore& b) {
    return std::tie(a.ref_id, a.tgt_id, a.metric) < std::tie(b.ref_id, b.tgt_id, b.metric);
  });
}

void sort_errors(std::vector<PairError>& v) {
  std::sort(v.begin(), v.end(), [](const PairError& a, const PairError& b) {
    return std::tie(a.ref_id, a.tgt_id, a.metric) < std::tie(b.ref_id, b.tgt_id, b.metric);
  });
}

void check_failures(std::size_t failed, std::size_t attempted, const EvaluationConfig& config) {
  if (attempted == 0) return;
  if (static_cast<double>(failed) > config.max_failure_fraction * static_cast<double>(attempted)) {
    throw AbortedRunError(std::to_string(failed) + " of " + std::to_string(attempted) +
                          " pair evaluations failed");
  }
}

std::vector<PairTask> cross_tasks(const TrackSet& ref, const TrackSet& tgt, bool include_self) {
  std::vector<PairTask> tasks;
  tasks.reserve(ref.tracks.size() * tgt.tracks.size());
  for (std::size_t i = 0; i < ref.tracks.size(); ++i) {
    for (std::size_t j = 0; j < tgt.tracks.size(); ++j) {
      if (!include_self && ref.tracks[i].id == tgt.tracks[j].id) continue;
      tasks.push_back({i, j});
    }
  }
  return tasks;
}

std::vector<double> values_of(const std::vector<PairScore>& scores, const std::string& metric) {
  std::vector<double> v;
  for (const auto& s : scores) {
    if (s.metric == metric) v.push_back(s.value);
  }
  return v;
}

/// FAD over the tracks whose frames loaded; skipped tracks become warnings.
double fad_between(const SetFeatures& a, const SetFeatures& b, const std::string& model,
                   const std::vector<std::size_t>* subset_b, std::vector<std::string>& warnings) {
  auto collect = [&](const SetFeatures& s, const std::vector<std::size_t>* subset) {
    EmbeddingSet es;
    es.model_id = model;
    auto take = [&](std::size_t i) {
      const TrackFeatures& f = s.tracks[i];
      const std::string& id = s.set->tracks[i].id;
      if (model == kBuiltinModel) {
        if (f.audio) es.add(id, f.audio->embedding);
        else warnings.push_back("fad: skipped track '" + id + "': " + f.audio_error);
      } else if (auto it = f.embeddings.find(model); it != f.embeddings.end()) {
        es.add(id, it->second);
      } else {
        warnings.push_back("fad: skipped track '" + id + "': " + f.embedding_errors.at(model));
      }
    };
    if (subset) {
      for (std::size_t i : *subset) take(i);
    } else {
      for (std::size_t i = 0; i < s.tracks.size(); ++i) take(i);
    }
    return es;
  };
  const EmbeddingSet ea = collect(a, nullptr);
  const EmbeddingSet eb = collect(b, subset_b);
  if (ea.entries.empty() || eb.entries.empty()) throw EmptyInputError("FAD over an empty set");
  const auto fa = fit_gaussian(pool_frames(ea));
  const auto fb = fit_gaussian(pool_frames(eb));
  for (const auto* fit : {&fa, &fb}) {
    if (fit->low_sample) {
      warnings.push_back("fad: " + std::to_string(fit->samples) + " vectors for dimension " +
                         std::to_string(fit->dim()) + "; covariance is rank deficient");
    }
  }
  return frechet_distance(fa, fb);
}

nlohmann::json provenance_json(const EvaluationConfig& config, const std::vector<const MetricInfo*>& metrics,
                               const std::string& mode) {
  nlohmann::json bindings = nlohmann::json::object();
  for (const MetricInfo* m : metrics) {
    if (m->family != MetricFamily::kCover) bindings[m->name] = config.binding(m->name);
  }
  nlohmann::json thresholds = nlohmann::json::object();
  for (const auto& [metric, cutoff] : config.thresholds) thresholds[metric] = cutoff;
  nlohmann::json metric_names = nlohmann::json::array();
  for (const MetricInfo* m : metrics) metric_names.push_back(m->name);

  nlohmann::json cfg{{"mode", mode},
                     {"reference_manifest", config.reference_manifest.generic_string()},
                     {"target_manifest", config.target_manifest.generic_string()},
                     {"control_manifest", config.control_manifest ? nlohmann::json(config.control_manifest->generic_string())
                                                                  : nlohmann::json(nullptr)},
                     {"metrics", metric_names},
                     {"bindings", bindings},
                     {"thresholds", thresholds},
                     {"include_self_pairs", config.include_self_pairs},
                     {"seed", config.seed},
                     {"sample_rate", config.sample_rate},
                     {"max_failure_fraction", config.max_failure_fraction}};
  nlohmann::json params{
      {"coverid",
       {{"kappa", config.coverid.kappa},
        {"gap_onset", config.coverid.gap_onset},
        {"gap_extend", config.coverid.gap_extend},
        {"epsilon", kCoverIdEpsilon},
        {"distance", "sqrt(target frames) / (qmax + epsilon)"}}},
      {"hpcp",
       {{"frame_size", config.hpcp.frame_size},
        {"hop", config.hpcp.hop},
        {"min_frequency_hz", config.hpcp.min_frequency_hz},
        {"max_frequency_hz", config.hpcp.max_frequency_hz},
        {"harmonics", config.hpcp.harmonics},
        {"window_semitones", config.hpcp.window_semitones},
        {"peak_threshold", config.hpcp.peak_threshold},
        {"max_peaks", config.hpcp.max_peaks},
        {"reference_hz", config.hpcp.reference_hz}}},
      {"kl", {{"epsilon", config.kl_epsilon}, {"log", "natural"}, {"symmetric", "mean of both directions"}}},
      {"embedding_pooling", "frame mean, L2-normalized, cosine"},
      {"fad", {{"covariance", "unbiased"}, {"experimental", true}}},
      {"builtin_model",
       "chroma/energy/spectral summary; self-contained stand-in, not equivalent to CLAP or Discogs-EffNet"}};
  return {{"engine_version", std::string(kEngineVersion)}, {"config", cfg}, {"parameters", params}};
}

std::string degree_label(double degree) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g%%", degree * 100.0);
  return buf;
}

}  // namespace

EvaluationReport evaluate_sets(const TrackSet& reference, const TrackSet& target, const TrackSet* control,
                               const EvaluationConfig& config) {
  const auto metrics = resolve_metrics(config);
  EvaluationReport report;
  report.provenance = provenance_json(config, metrics, "eval");

  const SetFeatures ref_features = extract_set(reference, metrics, config);
  const bool same_target = &target == &reference;
  const SetFeatures tgt_features = same_target ? SetFeatures{} : extract_set(target, metrics, config);
  const SetFeatures& tgt = same_target ? ref_features : tgt_features;

  ScoredPairs scored = score_tasks(ref_features, tgt, cross_tasks(reference, target, config.include_self_pairs),
                                   metrics, config);
  std::size_t attempted = scored.attempted;
  std::size_t failed = scored.errors.size();
  report.per_pair = std::move(scored.scores);
  report.errors = std::move(scored.errors);

  std::optional<SetFeatures> ctl_features;
  if (control) {
    ctl_features = extract_set(*control, metrics, config);
    ScoredPairs ctl = score_tasks(ref_features, *ctl_features, cross_tasks(reference, *control, config.include_self_pairs),
                                  metrics, config);
    attempted += ctl.attempted;
    failed += ctl.errors.size();
    report.control_pairs = std::move(ctl.scores);
    report.errors.insert(report.errors.end(), ctl.errors.begin(), ctl.errors.end());
  }
  check_failures(failed, attempted, config);
  sort_scores(report.per_pair);
  sort_scores(report.control_pairs);
  sort_errors(report.errors);

  for (const MetricInfo* m : metrics) {
    const std::string model = config.binding(m->name);
    if (m->family == MetricFamily::kSet) {
      GlobalEntry g{m->name, "target", model, {}, fad_between(ref_features, tgt, model, nullptr, report.warnings), true};
      report.global.push_back(g);
      if (ctl_features) {
        report.global.push_back(
            {m->name, "control", model, {}, fad_between(ref_features, *ctl_features, model, nullptr, report.warnings), true});
      }
      continue;
    }
    const auto tv = values_of(report.per_pair, m->name);
    if (!tv.empty()) report.global.push_back({m->name, "target", model, summarize(tv), std::nullopt, false});
    if (control) {
      const auto cv = values_of(report.control_pairs, m->name);
      if (!cv.empty()) report.global.push_back({m->name, "control", model, summarize(cv), std::nullopt, false});
    }
  }

  for (const auto& [metric, cutoff] : config.thresholds) {
    auto flagged = flag_pairs(report, metric, cutoff);
    report.flags.insert(report.flags.end(), flagged.begin(), flagged.end());
  }
  return report;
}

EvaluationReport evaluate_pairwise(const EvaluationConfig& config) {
  const TrackSet reference = load_track_set(config.reference_manifest);
  std::error_code ec;
  const bool same = fs::equivalent(config.reference_manifest, config.target_manifest, ec);
  std::optional<TrackSet> target;
  if (!same) target = load_track_set(config.target_manifest);
  std::optional<TrackSet> control;
  if (config.control_manifest) control = load_track_set(*config.control_manifest);
  return evaluate_sets(reference, same ? reference : *target, control ? &*control : nullptr, config);
}

double evaluate_fad_sets(const TrackSet& reference, const TrackSet& target, const EvaluationConfig& config) {
  const std::vector<const MetricInfo*> metrics{&metric_info("fad")};
  const std::string model = config.binding("fad");
  const SetFeatures a = extract_set(reference, metrics, config);
  const SetFeatures b = &reference == &target ? SetFeatures{} : extract_set(target, metrics, config);
  std::vector<std::string> warnings;
  return fad_between(a, &reference == &target ? a : b, model, nullptr, warnings);
}

double evaluate_fad_global(const EvaluationConfig& config) {
  const TrackSet reference = load_track_set(config.reference_manifest);
  const TrackSet target = load_track_set(config.target_manifest);
  return evaluate_fad_sets(reference, target, config);
}

std::vector<FlaggedPair> flag_pairs(const EvaluationReport& report, const std::string& metric, double threshold) {
  const MetricInfo& info = metric_info(metric);
  const bool present = std::any_of(report.per_pair.begin(), report.per_pair.end(),
                                   [&](const PairScore& s) { return s.metric == metric; }) ||
                       std::any_of(report.global.begin(), report.global.end(),
                                   [&](const GlobalEntry& g) { return g.metric == metric; });
  if (!present) throw ConfigError("metric '" + metric + "' is not present in the report");
  if (info.family == MetricFamily::kSet) throw ConfigError("metric 'fad' is set-level and has no pairs to flag");

  std::vector<FlaggedPair> out;
  for (const auto& s : report.per_pair) {
    if (s.metric != metric) continue;
    const bool crossed = info.higher_is_similar ? s.value >= threshold : s.value <= threshold;
    if (crossed) out.push_back({s, threshold});
  }
  std::stable_sort(out.begin(), out.end(), [&](const FlaggedPair& a, const FlaggedPair& b) {
    if (a.pair.value != b.pair.value) {
      return info.higher_is_similar ? a.pair.value > b.pair.value : a.pair.value < b.pair.value;
    }
    return std::tie(a.pair.ref_id, a.pair.tgt_id) < std::tie(b.pair.ref_id, b.pair.tgt_id);
  });
  return out;
}

EvaluationReport sensitivity_experiment(const CorpusManifest& corpus, const TrackSet& references,
                                        const TrackSet& replicas, const EvaluationConfig& config) {
  const auto metrics = resolve_metrics(config);
  if (corpus.degrees.empty()) throw ConfigError("corpus has no replication degrees");

  std::map<std::string, std::size_t> ref_index;
  for (std::size_t i = 0; i < references.tracks.size(); ++i) ref_index[references.tracks[i].id] = i;
  std::map<std::string, std::size_t> rep_index;
  for (std::size_t i = 0; i < replicas.tracks.size(); ++i) rep_index[replicas.tracks[i].id] = i;

  std::vector<std::vector<PairTask>> degree_tasks(corpus.degrees.size());
  std::vector<std::vector<std::size_t>> degree_replicas(corpus.degrees.size());
  for (const auto& spec : corpus.specs) {
    const auto d = std::find_if(corpus.degrees.begin(), corpus.degrees.end(),
                                [&](double x) { return std::abs(x - spec.proportion) < 1e-12; });
    if (d == corpus.degrees.end()) {
      throw ConfigError("replica '" + spec.replica_id + "' has proportion outside the corpus degrees");
    }
    const auto r = ref_index.find(spec.reference_id);
    if (r == ref_index.end()) throw ConfigError("replica '" + spec.replica_id + "' references unknown track '" + spec.reference_id + "'");
    const auto t = rep_index.find(spec.replica_id);
    if (t == rep_index.end()) throw ConfigError("replica '" + spec.replica_id + "' is missing from the replica set");
    const auto di = static_cast<std::size_t>(d - corpus.degrees.begin());
    degree_tasks[di].push_back({r->second, t->second});
    degree_replicas[di].push_back(t->second);
  }
  for (std::size_t d = 0; d < corpus.degrees.size(); ++d) {
    if (degree_tasks[d].empty()) throw ConfigError("no replicas for degree " + degree_label(corpus.degrees[d]));
  }

  EvaluationReport report;
  report.provenance = provenance_json(config, metrics, "stats");
  report.provenance["corpus"] = {{"genre", corpus.genre},
                                 {"degrees", corpus.degrees},
                                 {"replicas_per_song", corpus.replicas_per_song},
                                 {"seed", corpus.seed},
                                 {"crossfade_ms", corpus.crossfade_ms},
                                 {"replicas", corpus.specs.size()}};

  const SetFeatures ref_features = extract_set(references, metrics, config);
  const SetFeatures rep_features = extract_set(replicas, metrics, config);

  ScoredPairs baseline = score_tasks(ref_features, ref_features, cross_tasks(references, references, config.include_self_pairs),
                                     metrics, config);
  std::vector<ScoredPairs> degree_scores;
  std::size_t attempted = baseline.attempted;
  std::size_t failed = baseline.errors.size();
  for (std::size_t d = 0; d < corpus.degrees.size(); ++d) {
    degree_scores.push_back(score_tasks(ref_features, rep_features, degree_tasks[d], metrics, config));
    attempted += degree_scores.back().attempted;
    failed += degree_scores.back().errors.size();
  }
  check_failures(failed, attempted, config);

  SensitivityReport sens;
  sens.degrees = corpus.degrees;
  for (const MetricInfo* m : metrics) {
    const std::string model = config.binding(m->name);
    if (m->family == MetricFamily::kSet) {
      sens.fad_model = model;
      sens.fad.push_back({0.0, fad_between(ref_features, ref_features, model, nullptr, report.warnings)});
      report.global.push_back({m->name, "baseline", model, {}, sens.fad.back().value, true});
      for (std::size_t d = 0; d < corpus.degrees.size(); ++d) {
        sens.fad.push_back({corpus.degrees[d], fad_between(ref_features, rep_features, model, &degree_replicas[d], report.warnings)});
        report.global.push_back({m->name, degree_label(corpus.degrees[d]), model, {}, sens.fad.back().value, true});
      }
      continue;
    }
    std::vector<LabeledGroup> groups;
    groups.push_back({"baseline", values_of(baseline.scores, m->name)});
    for (std::size_t d = 0; d < corpus.degrees.size(); ++d) {
      groups.push_back({degree_label(corpus.degrees[d]), values_of(degree_scores[d].scores, m->name)});
    }
    const bool complete = std::all_of(groups.begin(), groups.end(), [](const LabeledGroup& g) { return !g.values.empty(); });
    if (!complete) {
      report.warnings.push_back("metric '" + m->name + "' has a group without scores; statistics skipped");
      continue;
    }

    MetricSensitivity ms;
    ms.metric = m->name;
    ms.higher_is_similar = m->higher_is_similar;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double degree = g == 0 ? 0.0 : corpus.degrees[g - 1];
      ms.trend.push_back({groups[g].label, degree, summarize(groups[g].values)});
      report.global.push_back({m->name, groups[g].label, model, ms.trend.back().summary, std::nullopt, false});
    }
    std::vector<std::vector<double>> all;
    for (const auto& g : groups) all.push_back(g.values);
    ms.omnibus = kruskal_wallis(all);
    for (std::size_t d = 0; d < corpus.degrees.size(); ++d) {
      ms.baseline_vs_degree.push_back({corpus.degrees[d], kruskal_wallis({groups[0].values, groups[d + 1].values})});
    }
    ms.pairwise = dunn_pairwise(groups, PValueCorrection::kHolm);
    sens.metrics.push_back(std::move(ms));
  }
  report.stats = std::move(sens);

  report.per_pair = std::move(baseline.scores);
  report.errors = std::move(baseline.errors);
  for (auto& s : degree_scores) {
    report.per_pair.insert(report.per_pair.end(), s.scores.begin(), s.scores.end());
    report.errors.insert(report.errors.end(), s.errors.begin(), s.errors.end());
  }
  sort_scores(report.per_pair);
  sort_errors(report.errors);
  for (const auto& [metric, cutoff] : config.thresholds) {
    auto flagged = flag_pairs(report, metric, cutoff);
    report.flags.insert(report.flags.end(), flagged.begin(), flagged.end());
  }
  return report;
}

}  // namespace mira
