#pragma once

// Budgeted subset selection. Maximizing the summed predicted quality subject
// to a per-query FLOPs budget epsilon is a 0/1 knapsack: profits are the
// alpha-shifted (positive) quality scores, weights are the FLOPs costs mapped
// onto an integer grid of `grid_resolution` units spanning [0, epsilon].

#include <budgetens/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace budgetens {

struct CandidateInput {
  std::size_t model_index = 0;
  double quality = 0;  // predicted quality, BARTScore scale (usually negative)
  double cost = 0;     // FLOPs
};

struct CandidateItem {
  std::size_t model_index = 0;
  double quality = 0;
  double cost = 0;
  double target_score = 0;  // alpha + quality
  std::int64_t cost_units = 0;
};

struct KnapsackItem {
  std::int64_t cost_units = 0;
  double target_score = 0;
};

struct SelectionResult {
  std::vector<std::size_t> selected;  // registry indices, ascending
  double total_cost = 0;
  std::int64_t total_cost_units = 0;
  double total_target_score = 0;
  double alpha = 0;
  double epsilon = 0;
  std::int64_t grid_resolution = 0;
  bool infeasible = false;
  std::vector<CandidateItem> items;
  // Subset maximizing the un-shifted quality sum under the same constraint,
  // reported only when requested.
  std::optional<std::vector<std::size_t>> raw_score_optimal;
};

struct SelectOptions {
  bool report_raw_optimum = false;
};

inline std::vector<CandidateInput> make_candidates(std::span<const double> scores, std::span<const double> costs) {
  if (scores.size() != costs.size()) throw ValidationError("scores and costs differ in length");
  std::vector<CandidateInput> c;
  c.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) c.push_back({i, scores[i], costs[i]});
  return c;
}

inline double choose_alpha(std::span<const double> qualities) {
  if (qualities.empty()) throw ValidationError("choose_alpha: empty quality list");
  double m = 0;
  for (double q : qualities) {
    if (!std::isfinite(q)) throw ValidationError("choose_alpha: non-finite quality");
    m = std::max(m, std::abs(q));
  }
  return m + 1.0;
}

inline std::vector<double> transform_scores(std::span<const double> qualities, double alpha) {
  std::vector<double> out;
  out.reserve(qualities.size());
  for (double q : qualities) {
    if (!(alpha > std::abs(q)))
      throw ValidationError("transform_scores: alpha must exceed every |quality|");
    out.push_back(alpha + q);
  }
  return out;
}

struct QuantizedCosts {
  std::vector<std::int64_t> units;
  std::int64_t capacity = 0;
};

// Ceiling rounding: any subset whose units fit the capacity also fits epsilon
// in raw FLOPs.
inline QuantizedCosts quantize_costs(std::span<const double> costs, double epsilon,
                                     std::int64_t grid_resolution) {
  if (!(epsilon > 0) || !std::isfinite(epsilon)) throw ValidationError("quantize_costs: epsilon must be > 0");
  if (grid_resolution < 1) throw ValidationError("quantize_costs: grid_resolution must be >= 1");
  QuantizedCosts q;
  q.capacity = grid_resolution;
  q.units.reserve(costs.size());
  const double grid = static_cast<double>(grid_resolution);
  // Items this expensive can never fit; keep them clear of int64 overflow.
  const double ceiling = 4.0 * grid + 4.0;
  for (double c : costs) {
    if (!(c >= 0) || !std::isfinite(c)) throw ValidationError("quantize_costs: costs must be finite and >= 0");
    if (c == 0) {
      q.units.push_back(0);
      continue;
    }
    double u = std::ceil(c * grid / epsilon);
    u = std::clamp(u, 1.0, ceiling);
    q.units.push_back(static_cast<std::int64_t>(u));
  }
  return q;
}

// Dynamic program over (items x capacity) with the classic backtrace: walk
// items from last to first and take item i whenever dp[i][j] != dp[i-1][j].
inline std::vector<std::size_t> knapsack(std::span<const KnapsackItem> items, std::int64_t capacity) {
  if (capacity < 0) capacity = 0;
  const std::size_t n = items.size();
  const auto width = static_cast<std::size_t>(capacity) + 1;
  std::vector<double> dp((n + 1) * width, 0.0);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return dp[i * width + j]; };

  for (std::size_t i = 1; i <= n; ++i) {
    const auto& item = items[i - 1];
    for (std::size_t j = 0; j < width; ++j) {
      const double skip = at(i - 1, j);
      if (item.cost_units >= 0 && static_cast<std::size_t>(item.cost_units) <= j) {
        const double take = at(i - 1, j - static_cast<std::size_t>(item.cost_units)) + item.target_score;
        at(i, j) = std::max(skip, take);
      } else {
        at(i, j) = skip;
      }
    }
  }

  std::vector<std::size_t> selected;
  std::size_t j = width - 1;
  for (std::size_t i = n; i >= 1; --i) {
    if (at(i, j) != at(i - 1, j)) {
      selected.push_back(i - 1);
      j -= static_cast<std::size_t>(items[i - 1].cost_units);
    }
  }
  std::reverse(selected.begin(), selected.end());
  return selected;
}

namespace detail {

inline std::vector<std::size_t> raw_optimum(std::span<const CandidateItem> items, std::int64_t capacity) {
  // Shift-free optimum. With all-negative qualities the unconstrained DP
  // prefers the empty set, so fall back to the best affordable singleton.
  std::vector<KnapsackItem> raw;
  raw.reserve(items.size());
  for (const auto& it : items) raw.push_back({it.cost_units, it.quality});
  auto picked = knapsack(raw, capacity);
  if (!picked.empty()) return picked;
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].cost_units > capacity) continue;
    if (!best || items[i].quality > items[*best].quality) best = i;
  }
  if (best) picked.push_back(*best);
  return picked;
}

}  // namespace detail

inline SelectionResult select(std::span<const CandidateInput> candidates, double epsilon,
                              std::int64_t grid_resolution, SelectOptions options = {}) {
  if (candidates.empty()) throw ValidationError("select: no candidates");
  if (!(epsilon > 0) || !std::isfinite(epsilon)) throw ValidationError("select: epsilon must be > 0");

  std::vector<double> qualities;
  std::vector<double> costs;
  for (const auto& c : candidates) {
    qualities.push_back(c.quality);
    costs.push_back(c.cost);
  }

  SelectionResult r;
  r.alpha = choose_alpha(qualities);
  r.epsilon = epsilon;
  r.grid_resolution = grid_resolution;
  const auto scores = transform_scores(qualities, r.alpha);
  const auto quant = quantize_costs(costs, epsilon, grid_resolution);

  r.items.reserve(candidates.size());
  std::vector<KnapsackItem> ks;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    r.items.push_back({candidates[i].model_index, qualities[i], costs[i], scores[i], quant.units[i]});
    ks.push_back({quant.units[i], scores[i]});
  }

  auto raw_total = [&](const std::vector<std::size_t>& picked) {
    double s = 0;
    for (auto p : picked) s += costs[p];
    return s;
  };

  std::vector<std::size_t> all(candidates.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  std::vector<std::size_t> picked;
  if (raw_total(all) <= epsilon) {
    // Every profit is positive, so when the whole pool fits the raw budget it
    // is optimal; ceiling rounding must not exclude it.
    picked = all;
  } else {
    std::int64_t capacity = quant.capacity;
    picked = knapsack(ks, capacity);
    // Guard against floating-point summation pushing a grid-feasible subset
    // a few ulps past epsilon.
    while (!picked.empty() && raw_total(picked) > epsilon && capacity > 0) {
      --capacity;
      picked = knapsack(ks, capacity);
    }
  }

  for (auto p : picked) {
    r.selected.push_back(candidates[p].model_index);
    r.total_cost += costs[p];
    r.total_cost_units += quant.units[p];
    r.total_target_score += scores[p];
  }
  std::sort(r.selected.begin(), r.selected.end());
  r.infeasible = r.selected.empty();

  if (options.report_raw_optimum) {
    std::vector<std::size_t> raw;
    for (auto p : detail::raw_optimum(r.items, quant.capacity)) raw.push_back(candidates[p].model_index);
    std::sort(raw.begin(), raw.end());
    r.raw_score_optimal = std::move(raw);
  }
  return r;
}

struct SweepPoint {
  double fraction = 0;
  SelectionResult result;
};

inline std::vector<SweepPoint> budget_sweep(std::span<const CandidateInput> candidates,
                                            std::span<const double> fractions, double baseline_cost,
                                            std::int64_t grid_resolution) {
  if (!(baseline_cost > 0)) throw ValidationError("budget_sweep: baseline cost must be > 0");
  std::vector<SweepPoint> out;
  out.reserve(fractions.size());
  for (double f : fractions) {
    if (!(f > 0 && f <= 1)) throw ValidationError("budget_sweep: fractions must lie in (0, 1]");
    out.push_back({f, select(candidates, f * baseline_cost, grid_resolution)});
  }
  return out;
}

}  // namespace budgetens
