#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mira/cover.hpp"
#include "mira/dsp.hpp"
#include "mira/embedding.hpp"
#include "mira/replication.hpp"
#include "mira/stats.hpp"
#include "mira/track_set.hpp"

namespace mira {

inline constexpr std::string_view kEngineVersion = "0.1.0";
inline constexpr std::string_view kBuiltinModel = "builtin";

enum class MetricFamily {
  kCover,         // chroma alignment
  kDistribution,  // symmetric KL over label distributions
  kEmbedding,     // cosine over pooled embeddings
  kSet,           // set-level Frechet distance
};

struct MetricInfo {
  std::string name;
  MetricFamily family;
  bool higher_is_similar;
  std::string default_binding;  // model id, empty for metrics that read audio directly
};

const std::vector<MetricInfo>& metric_registry();
/// Throws ConfigError for an unknown name.
const MetricInfo& metric_info(std::string_view name);

struct PairScore {
  std::string ref_id;
  std::string tgt_id;
  std::string metric;
  double value = 0.0;
  bool higher_is_similar = false;

  bool operator==(const PairScore&) const = default;
};

/// A pair that could not be scored. Unscored pairs never carry a value.
struct PairError {
  std::string ref_id;
  std::string tgt_id;
  std::string metric;
  std::string message;

  bool operator==(const PairError&) const = default;
};

struct EvaluationConfig {
  std::filesystem::path reference_manifest;
  std::filesystem::path target_manifest;
  std::optional<std::filesystem::path> control_manifest;
  std::vector<std::string> metrics;
  std::map<std::string, std::string> bindings;  // metric -> model id, overrides registry defaults
  std::map<std::string, double> thresholds;
  bool include_self_pairs = false;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0 = hardware concurrency
  int sample_rate = kDefaultSampleRate;
  CoverIdParams coverid;
  HpcpParams hpcp;
  double kl_epsilon = kDefaultKlEpsilon;
  /// Run aborts when more than this fraction of pair evaluations fail.
  double max_failure_fraction = 0.10;

  /// Model bound to `metric` (empty for CoverID).
  std::string binding(const std::string& metric) const;
};

/// Summary of one metric over one comparison (e.g. "target", "control",
/// "baseline", "50%"). Set-level metrics carry `value` instead of a summary.
struct GlobalEntry {
  std::string metric;
  std::string comparison;
  std::string model;
  SummaryStats summary;
  std::optional<double> value;
  bool experimental = false;

  bool operator==(const GlobalEntry&) const = default;
};

struct FlaggedPair {
  PairScore pair;
  double threshold = 0.0;

  bool operator==(const FlaggedPair&) const = default;
};

struct DegreePoint {
  std::string group;  // "baseline" or e.g. "10%"
  double degree = 0.0;  // 0 for the baseline
  SummaryStats summary;

  bool operator==(const DegreePoint&) const = default;
};

struct DegreeTest {
  double degree = 0.0;
  KWResult result;

  bool operator==(const DegreeTest&) const = default;
};

struct MetricSensitivity {
  std::string metric;
  bool higher_is_similar = false;
  std::vector<DegreePoint> trend;
  KWResult omnibus;                        // all groups
  std::vector<DegreeTest> baseline_vs_degree;  // two-group tests
  std::vector<PairwiseResult> pairwise;    // Dunn, Holm-adjusted

  bool operator==(const MetricSensitivity&) const = default;
};

struct FadPoint {
  double degree = 0.0;
  double value = 0.0;

  bool operator==(const FadPoint&) const = default;
};

struct SensitivityReport {
  std::vector<double> degrees;
  std::vector<MetricSensitivity> metrics;
  std::string fad_model;
  std::vector<FadPoint> fad;  // baseline first; experimental, never tested
  double significance = kDefaultSignificance;

  bool operator==(const SensitivityReport&) const = default;
};

struct EvaluationReport {
  std::vector<PairScore> per_pair;       // reference x target (or corpus groups)
  std::vector<PairScore> control_pairs;  // reference x control
  std::vector<PairError> errors;
  std::vector<GlobalEntry> global;
  std::vector<FlaggedPair> flags;
  std::optional<SensitivityReport> stats;
  std::vector<std::string> warnings;
  nlohmann::json provenance;

  bool operator==(const EvaluationReport&) const = default;
};

/// Scores every (reference, target) pair under every per-pair metric, plus
/// reference x control when a control set is given. Pairs with equal ids are
/// skipped unless include_self_pairs. Output is ordered by (ref, tgt, metric)
/// whatever the worker count.
EvaluationReport evaluate_pairwise(const EvaluationConfig& config);
EvaluationReport evaluate_sets(const TrackSet& reference, const TrackSet& target, const TrackSet* control,
                               const EvaluationConfig& config);

/// Set-level FAD between the reference and target sets.
double evaluate_fad_global(const EvaluationConfig& config);
double evaluate_fad_sets(const TrackSet& reference, const TrackSet& target, const EvaluationConfig& config);

/// Pairs at or beyond `threshold` in the metric's similarity direction, most
/// suspicious first. Throws ConfigError if the metric is not in the report.
std::vector<FlaggedPair> flag_pairs(const EvaluationReport& report, const std::string& metric, double threshold);

/// Baseline (reference x reference) against each replication degree, where
/// each reference is paired only with its own replicas.
EvaluationReport sensitivity_experiment(const CorpusManifest& corpus, const TrackSet& references,
                                        const TrackSet& replicas, const EvaluationConfig& config);

enum class ReportFormat { kCsv, kJson, kSvg };

/// Parses "csv,json,svg". Throws ConfigError on an unknown entry.
std::set<ReportFormat> parse_formats(std::string_view list);

/// pairs.csv, report.json and one trend_<metric>.svg per metric.
std::vector<std::filesystem::path> write_report(const EvaluationReport& report, const std::filesystem::path& out_dir,
                                                const std::set<ReportFormat>& formats);

nlohmann::json to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const nlohmann::json& doc);
EvaluationReport read_report(const std::filesystem::path& json_file);

}  // namespace mira
