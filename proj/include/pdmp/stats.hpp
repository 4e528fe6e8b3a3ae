#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace pdmp::stats {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("variance needs at least two values");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

/// Linear-interpolation quantile (R type 7).
inline double quantile(std::vector<double> xs, double prob) {
  if (xs.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double h = (static_cast<double>(xs.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

inline double iqr(const std::vector<double>& xs) { return quantile(xs, 0.75) - quantile(xs, 0.25); }

/// sup_x |F_n(x) - F(x)| for a continuous reference CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw std::invalid_argument("KS statistic of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// P(D_n >= d) from the Kolmogorov limit law with Stephens' small-sample
/// correction.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace pdmp::stats
