#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace traveltime {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

inline double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - 0.5 * d * d / var;
}

/// Log density of LN(mu, sigma2) at x > 0.
inline double lognormal_logpdf(double x, double mu, double sigma2) {
  if (!(x > 0.0)) return -INFINITY;
  return normal_logpdf(std::log(x), mu, sigma2) - std::log(x);
}

/**
 * Dirichlet log density at a point of the simplex, with respect to Lebesgue
 * measure on the first n-1 coordinates. A one-component Dirichlet is a point
 * mass and contributes 0.
 */
inline double dirichlet_logpdf(std::span<const double> x, std::span<const double> concentration) {
  assert(x.size() == concentration.size());
  if (x.size() <= 1) return 0.0;
  double total = 0.0;
  double out = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0)) return -INFINITY;
    total += concentration[k];
    out += (concentration[k] - 1.0) * std::log(x[k]) - std::lgamma(concentration[k]);
  }
  return out + std::lgamma(total);
}

/// Empirical quantile with linear interpolation between order statistics. Sorts `v`.
inline double quantile_inplace(std::vector<double>& v, double q) {
  assert(!v.empty());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace traveltime
