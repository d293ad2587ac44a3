#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>

namespace mkbo {

inline double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Population standard deviation (single sample gives 0).
inline double stddev(std::span<const double> v) {
  const double mu = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Inverse standard normal CDF. Bisection bracket plus Newton polish; the
// result is deterministic and accurate to ~1e-13 for p in (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  double z = 0.5 * (lo + hi);
  for (int i = 0; i < 4; ++i) {
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    if (pdf < 1e-300) break;
    z -= (normal_cdf(z) - p) / pdf;
  }
  return z;
}

// Halfwidth multiplier of the central interval with mass alpha: z with
// P(|N(0,1)| <= z) = alpha. alpha = 0 gives 0.
inline double central_quantile_halfwidth(double alpha) {
  if (alpha < 0.0 || alpha >= 1.0) throw std::invalid_argument("central quantile: alpha in [0,1)");
  if (alpha == 0.0) return 0.0;
  return normal_quantile(0.5 * (1.0 + alpha));
}

}  // namespace mkbo
