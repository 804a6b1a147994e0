#pragma once

// Test-only reference implementations. Nothing here calls into the library's
// algorithms; they exist to check them.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

struct Best {
  double score = 0;
  std::vector<std::size_t> subset;
};

// Exhaustive 0/1 knapsack over all 2^n subsets.
inline Best brute_force_knapsack(const std::vector<std::int64_t>& costs, const std::vector<double>& scores,
                                 std::int64_t capacity) {
  Best best;
  const std::size_t n = costs.size();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    std::int64_t c = 0;
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) {
        c += costs[i];
        s += scores[i];
      }
    if (c <= capacity && s > best.score) {
      best.score = s;
      best.subset.clear();
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1u) best.subset.push_back(i);
    }
  }
  return best;
}

// Same, with real-valued costs and a real budget.
inline Best brute_force_real(const std::vector<double>& costs, const std::vector<double>& scores, double budget) {
  Best best;
  const std::size_t n = costs.size();
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double c = 0, s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) {
        c += costs[i];
        s += scores[i];
      }
    if (c <= budget && s > best.score) {
      best.score = s;
      best.subset.clear();
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1u) best.subset.push_back(i);
    }
  }
  return best;
}

// Standard normal CDF by composite Simpson quadrature of the density over
// [0, |x|]; independent of erf/erfc.
inline double normal_cdf_quadrature(double x, int panels = 20000) {
  const double a = std::abs(x);
  const double h = a / panels;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
  double s = pdf(0) + pdf(a);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  const double half_mass = s * h / 3.0;
  return x >= 0 ? 0.5 + half_mass : 0.5 - half_mass;
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double central_difference(const std::function<double()>& f, double& param, double step) {
  const double saved = param;
  param = saved + step;
  const double up = f();
  param = saved - step;
  const double down = f();
  param = saved;
  return (up - down) / (2.0 * step);
}

}  // namespace oracle
