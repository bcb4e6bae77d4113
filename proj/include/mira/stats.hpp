#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

namespace mira {

struct RankResult {
  Eigen::VectorXd ranks;                // 1-based, ties share their mean rank
  std::vector<std::size_t> tie_groups;  // sizes of groups with more than one member
};

struct KWResult {
  double h = 0.0;
  int df = 1;
  double p_value = 1.0;
  double tie_correction = 1.0;

  bool operator==(const KWResult&) const = default;
};

struct PairwiseResult {
  std::string group_a;
  std::string group_b;
  double z = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;

  bool operator==(const PairwiseResult&) const = default;
};

struct SummaryStats {
  double mean = 0.0;
  double std = 0.0;  // population (divisor n)
  std::size_t n = 0;

  bool operator==(const SummaryStats&) const = default;
};

struct LabeledGroup {
  std::string label;
  std::vector<double> values;
};

enum class PValueCorrection { kNone, kBonferroni, kHolm };

inline constexpr double kDefaultSignificance = 0.05;

/// O(N log N) average ranking.
RankResult rank_with_ties(std::span<const double> values);

/// Upper tail of the chi-square distribution, Q(df/2, x/2).
double chi2_sf(double x, double df);

/// Tie-corrected Kruskal-Wallis H over k >= 2 groups. If every value is
/// identical the result is H = 0, p = 1. Throws ConfigError for fewer than
/// two groups and EmptyInputError for an empty group.
KWResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Dunn z-tests for every pair of groups on pooled, tie-corrected ranks.
/// Pairs are ordered (0,1), (0,2), ..., (1,2), ...
std::vector<PairwiseResult> dunn_pairwise(const std::vector<LabeledGroup>& groups,
                                          PValueCorrection correction = PValueCorrection::kHolm);

/// Holm step-down adjustment, returned in input order.
std::vector<double> holm_adjust(std::span<const double> p_values);

SummaryStats summarize(std::span<const double> values);

}  // namespace mira
