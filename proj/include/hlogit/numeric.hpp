#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace hlogit {

// Latent logistic level-1 variance, pi^2 / 3.
inline constexpr double kLevel1Variance = 3.289868133696452872944830333292;

// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
  if (x > 33.0) return x;
  if (x < -37.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// Inverse logit clamped away from exact 0/1 so downstream logs stay finite.
inline double inv_logit(double eta) {
  const double t = std::clamp(eta, -35.0, 35.0);
  return 1.0 / (1.0 + std::exp(-t));
}

// Bernoulli log-density for y in {0,1} with linear predictor eta:
//   y*eta - log(1 + exp(eta))
inline double bernoulli_loglik(double y, double eta) { return y * eta - log1pexp(eta); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double logsumexp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Two-sided Wald p-value for a z statistic.
inline double wald_p_value(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

// Empirical quantile with linear interpolation between order statistics.
// `sorted` must be ascending and nonempty; p in [0,1].
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// AIC = deviance + 2k, BIC = deviance + k ln(n).
struct InfoCriteria {
  double aic;
  double bic;
};

inline InfoCriteria information_criteria_from(double deviance, long n_params, long n_obs) {
  const double k = static_cast<double>(n_params);
  return {deviance + 2.0 * k, deviance + k * std::log(static_cast<double>(n_obs))};
}

inline std::vector<double> linspace(double a, double b, int m) {
  std::vector<double> out(static_cast<std::size_t>(m));
  if (m == 1) {
    out[0] = a;
    return out;
  }
  const double step = (b - a) / static_cast<double>(m - 1);
  for (int i = 0; i < m; ++i) out[static_cast<std::size_t>(i)] = a + step * i;
  return out;
}

}  // namespace hlogit
