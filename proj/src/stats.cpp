#include "mira/stats.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "mira/error.hpp"

namespace mira {

namespace {

struct Pooled {
  std::vector<double> values;
  std::vector<std::size_t> group_of;
  std::vector<std::size_t> sizes;
};

Pooled pool(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw ConfigError("at least two groups are required");
  Pooled p;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw EmptyInputError("group " + std::to_string(g) + " has no values");
    p.sizes.push_back(groups[g].size());
    for (double v : groups[g]) {
      p.values.push_back(v);
      p.group_of.push_back(g);
    }
  }
  return p;
}

double tie_sum(const std::vector<std::size_t>& ties) {
  double sum = 0.0;
  for (std::size_t t : ties) {
    const auto td = static_cast<double>(t);
    sum += td * td * td - td;
  }
  return sum;
}

}  // namespace

RankResult rank_with_ties(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  RankResult result;
  result.ranks.resize(static_cast<Eigen::Index>(n));
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 hold ranks i+1..j.
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) result.ranks[static_cast<Eigen::Index>(order[k])] = rank;
    if (j - i > 1) result.tie_groups.push_back(j - i);
    i = j;
  }
  return result;
}

double chi2_sf(double x, double df) {
  if (df <= 0.0) throw InvalidInputError("chi-square degrees of freedom must be positive");
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

KWResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  const Pooled p = pool(groups);
  const RankResult ranked = rank_with_ties(p.values);
  const auto n = static_cast<double>(p.values.size());

  std::vector<double> rank_sums(groups.size(), 0.0);
  for (std::size_t i = 0; i < p.values.size(); ++i) rank_sums[p.group_of[i]] += ranked.ranks[static_cast<Eigen::Index>(i)];

  KWResult r;
  r.df = static_cast<int>(groups.size()) - 1;
  r.tie_correction = 1.0 - tie_sum(ranked.tie_groups) / (n * n * n - n);
  if (r.tie_correction <= 0.0) {
    // Every value identical: no rank separation at all.
    r.tie_correction = 0.0;
    r.h = 0.0;
    r.p_value = 1.0;
    return r;
  }
  double between = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) between += rank_sums[g] * rank_sums[g] / static_cast<double>(p.sizes[g]);
  const double h = (12.0 / (n * (n + 1.0)) * between - 3.0 * (n + 1.0)) / r.tie_correction;
  r.h = std::max(0.0, h);
  r.p_value = std::clamp(chi2_sf(r.h, r.df), 0.0, 1.0);
  return r;
}

std::vector<double> holm_adjust(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double scaled = std::min(1.0, static_cast<double>(m - k) * p_values[order[k]]);
    running = std::max(running, scaled);
    adjusted[order[k]] = running;
  }
  return adjusted;
}

std::vector<PairwiseResult> dunn_pairwise(const std::vector<LabeledGroup>& groups, PValueCorrection correction) {
  std::vector<std::vector<double>> raw;
  raw.reserve(groups.size());
  for (const auto& g : groups) raw.push_back(g.values);
  const Pooled p = pool(raw);
  const RankResult ranked = rank_with_ties(p.values);
  const auto n = static_cast<double>(p.values.size());

  std::vector<double> mean_rank(groups.size(), 0.0);
  for (std::size_t i = 0; i < p.values.size(); ++i) mean_rank[p.group_of[i]] += ranked.ranks[static_cast<Eigen::Index>(i)];
  for (std::size_t g = 0; g < groups.size(); ++g) mean_rank[g] /= static_cast<double>(p.sizes[g]);

  const double variance = n * (n + 1.0) / 12.0 - tie_sum(ranked.tie_groups) / (12.0 * (n - 1.0));

  std::vector<PairwiseResult> out;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      PairwiseResult r;
      r.group_a = groups[a].label;
      r.group_b = groups[b].label;
      const double se = std::sqrt(std::max(0.0, variance) *
                                  (1.0 / static_cast<double>(p.sizes[a]) + 1.0 / static_cast<double>(p.sizes[b])));
      r.z = se > 0.0 ? (mean_rank[a] - mean_rank[b]) / se : 0.0;
      r.p_raw = std::clamp(std::erfc(std::abs(r.z) / std::sqrt(2.0)), 0.0, 1.0);
      out.push_back(r);
    }
  }

  std::vector<double> raw_p;
  for (const auto& r : out) raw_p.push_back(r.p_raw);
  switch (correction) {
    case PValueCorrection::kNone:
      for (auto& r : out) r.p_adjusted = r.p_raw;
      break;
    case PValueCorrection::kBonferroni:
      for (auto& r : out) r.p_adjusted = std::min(1.0, r.p_raw * static_cast<double>(out.size()));
      break;
    case PValueCorrection::kHolm: {
      const auto adj = holm_adjust(raw_p);
      for (std::size_t i = 0; i < out.size(); ++i) out[i].p_adjusted = adj[i];
      break;
    }
  }
  return out;
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw EmptyInputError("summary of an empty sequence");
  SummaryStats s;
  s.n = values.size();
  const auto n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  return s;
}

}  // namespace mira
