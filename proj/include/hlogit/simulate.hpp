#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hlogit/csv.hpp"
#include "hlogit/dataset.hpp"
#include "hlogit/design.hpp"
#include "hlogit/mixed.hpp"
#include "hlogit/rng.hpp"

namespace hlogit {

// Configuration for the synthetic two-level crash generator. Group sizes come
// from n_total when it is positive (spread as evenly as possible, earlier
// roads take the remainder), otherwise every road gets n_per_group rows.
struct GeneratorConfig {
  long n_roads = 99;
  long n_per_group = 200;
  long n_total = 0;

  double beta0 = -0.7;
  std::vector<std::pair<std::string, double>> beta = {
      {"driver_no_university", 0.46},
      {"driver_under_30", 0.26},
      {"lighting_night", 0.12},
      {"pavement_adverse", -0.34},
  };
  double sigma0 = 0.9165151389911679;  // sqrt(0.84)
  std::vector<std::pair<std::string, double>> random_slope_sds;

  // Bernoulli rates for the crash-level indicators.
  std::map<std::string, double> covariate_rates = {
      {"lighting_night", 0.34},      {"pavement_adverse", 0.11},
      {"geometry_curve", 0.37},      {"weather_adverse", 0.10},
      {"driver_no_university", 0.90}, {"driver_under_30", 0.32},
      {"driver_male", 0.95},
  };
  double aadt_median = 8110.0;  // AADT is lognormal around this median
  double aadt_log_sd = 0.5;
  double access_density_max = 2.2;      // uniform on [0, max]
  double heavy_vehicle_ratio_max = 0.21;

  std::uint64_t seed = 20260815;
};

namespace detail {

inline std::string padded_id(char prefix, long value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width)
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

inline int id_width(long max_value, int at_least) {
  int w = 1;
  for (long v = max_value; v >= 10; v /= 10) ++w;
  return std::max(w, at_least);
}

inline int* binary_field(CrashRecord& rec, const std::string& term) {
  if (term == "lighting_night") return &rec.lighting_night;
  if (term == "pavement_adverse") return &rec.pavement_adverse;
  if (term == "geometry_curve") return &rec.geometry_curve;
  if (term == "weather_adverse") return &rec.weather_adverse;
  if (term == "driver_no_university") return &rec.driver_no_university;
  if (term == "driver_under_30") return &rec.driver_under_30;
  if (term == "driver_male") return &rec.driver_male;
  return nullptr;
}

}  // namespace detail

// Draws a dataset from the two-level model: road profiles and random effects
// first, then crash rows with Bernoulli severities. All draws come from one
// seeded stream in a fixed order, so identical configs give identical data.
// When true_effects is supplied it receives the realised (intercept, slopes)
// per road on the linear-predictor scale.
inline Dataset generate(const GeneratorConfig& cfg, Eigen::MatrixXd* true_effects = nullptr) {
  if (cfg.n_roads < 1) fail(errc::invalid_config, "n_roads must be >= 1");
  if (cfg.n_total > 0) {
    if (cfg.n_total < cfg.n_roads)
      fail(errc::invalid_config, "n_total must be >= n_roads so every road has a crash");
  } else if (cfg.n_per_group < 1) {
    fail(errc::invalid_config, "n_per_group must be >= 1");
  }
  if (!(cfg.sigma0 >= 0.0)) fail(errc::invalid_config, "sigma0 must be >= 0");
  if (!(cfg.aadt_median > 0.0) || !(cfg.aadt_log_sd >= 0.0))
    fail(errc::invalid_config, "AADT parameters must be positive");
  for (const auto& [term, rate] : cfg.covariate_rates)
    if (!(rate >= 0.0 && rate <= 1.0))
      fail(errc::invalid_config, "rate for " + term + " must lie in [0, 1]");

  std::vector<std::pair<std::string, double>> beta;
  for (const auto& [name, value] : cfg.beta) beta.emplace_back(resolve_term(name), value);
  std::vector<std::pair<std::string, double>> slopes;
  for (const auto& [name, sd] : cfg.random_slope_sds) {
    if (!(sd >= 0.0)) fail(errc::invalid_config, "random-slope sd for " + name + " must be >= 0");
    slopes.emplace_back(resolve_term(name), sd);
  }

  const long J = cfg.n_roads;
  std::vector<long> sizes(static_cast<std::size_t>(J), cfg.n_per_group);
  if (cfg.n_total > 0) {
    const long base = cfg.n_total / J, rem = cfg.n_total % J;
    for (long j = 0; j < J; ++j) sizes[static_cast<std::size_t>(j)] = base + (j < rem ? 1 : 0);
  }
  const long n_total = std::accumulate(sizes.begin(), sizes.end(), 0L);

  Rng rng(cfg.seed);
  Dataset ds;
  const int road_w = detail::id_width(J, 2);
  const int crash_w = detail::id_width(n_total, 6);
  const long q = 1 + static_cast<long>(slopes.size());
  if (true_effects) *true_effects = Eigen::MatrixXd::Zero(J, q);

  std::vector<RoadProfile> profiles(static_cast<std::size_t>(J));
  for (long j = 0; j < J; ++j) {
    RoadProfile& rp = profiles[static_cast<std::size_t>(j)];
    rp.road_id = detail::padded_id('R', j + 1, road_w);
    rp.aadt = std::exp(rng.normal(std::log(cfg.aadt_median), cfg.aadt_log_sd));
    rp.access_density = rng.uniform(0.0, cfg.access_density_max);
    rp.heavy_vehicle_ratio = rng.uniform(0.0, cfg.heavy_vehicle_ratio_max);
    ds.roads[rp.road_id] = rp;
  }

  long crash_no = 0;
  for (long j = 0; j < J; ++j) {
    const RoadProfile& rp = profiles[static_cast<std::size_t>(j)];
    const double u0 = rng.normal(0.0, cfg.sigma0);
    std::vector<double> u_slope(slopes.size());
    for (std::size_t k = 0; k < slopes.size(); ++k) u_slope[k] = rng.normal(0.0, slopes[k].second);
    if (true_effects) {
      (*true_effects)(j, 0) = u0;
      for (std::size_t k = 0; k < slopes.size(); ++k)
        (*true_effects)(j, static_cast<long>(k) + 1) = u_slope[k];
    }

    for (long i = 0; i < sizes[static_cast<std::size_t>(j)]; ++i) {
      CrashRecord rec;
      rec.crash_id = detail::padded_id('C', ++crash_no, crash_w);
      rec.road_id = rp.road_id;
      for (const auto& [term, rate] : cfg.covariate_rates) {
        int* field = detail::binary_field(rec, term);
        if (!field) fail(errc::invalid_config, term + " is not a crash-level indicator");
        *field = rng.bernoulli(rate) ? 1 : 0;
      }
      double eta = cfg.beta0 + u0;
      for (const auto& [term, value] : beta) eta += value * covariate_value(rec, rp, term);
      for (std::size_t k = 0; k < slopes.size(); ++k)
        eta += u_slope[k] * covariate_value(rec, rp, slopes[k].first);
      rec.severity = rng.bernoulli(inv_logit(eta)) ? 1 : 0;
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

// Posterior-style uncertainty summary assembled from repeated parametric
// draws around a fitted mixed model.
struct SimulationSummary {
  long runs = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> terms;  // fixed-effect names
  Eigen::VectorXd mean;            // per-term mean across draws
  Eigen::VectorXd lo;              // 2.5th percentile
  Eigen::VectorXd hi;              // 97.5th percentile
  std::vector<std::string> road_ids;
  Eigen::VectorXd road_mean_intercept;  // mean intercept effect (L u)[0] per road
};

// Draw s uses its own stream derived from (seed, s), so summaries are stable
// under re-partitioning of the work. Fixed effects are drawn from
// N(beta-hat, vcov) via an eigenvalue-floored square root; group effects from
// the Laplace conditionals N(u-hat_j, diag(sd_j^2)) mapped through L.
inline SimulationSummary simulate_coefficients(const MixedFit& fit, long runs,
                                               std::uint64_t seed) {
  if (!fit.converged) fail(errc::not_converged, "refusing to simulate from a non-converged fit");
  if (runs < 1) fail(errc::invalid_config, "runs must be >= 1");

  const long p = fit.fixed.size();
  const long q = fit.cholesky.rows();
  const long J = fit.n_groups;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.vcov_fixed);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd root = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();

  Eigen::MatrixXd beta_draws(runs, p);
  Eigen::MatrixXd intercept_draws(runs, J);
  for (long s = 0; s < runs; ++s) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    Eigen::VectorXd z(p);
    for (long i = 0; i < p; ++i) z(i) = rng.normal();
    beta_draws.row(s) = (fit.fixed + root * z).transpose();
    for (long j = 0; j < J; ++j) {
      Eigen::VectorXd u(q);
      for (long k = 0; k < q; ++k)
        u(k) = rng.normal(fit.conditional_modes(j, k), fit.conditional_sds(j, k));
      intercept_draws(s, j) = (fit.cholesky * u)(0);
    }
  }

  SimulationSummary out;
  out.runs = runs;
  out.seed = seed;
  out.terms = fit.column_names;
  out.mean = beta_draws.colwise().mean().transpose();
  out.lo.resize(p);
  out.hi.resize(p);
  for (long i = 0; i < p; ++i) {
    std::vector<double> col(static_cast<std::size_t>(runs));
    for (long s = 0; s < runs; ++s) col[static_cast<std::size_t>(s)] = beta_draws(s, i);
    std::sort(col.begin(), col.end());
    out.lo(i) = quantile_sorted(col, 0.025);
    out.hi(i) = quantile_sorted(col, 0.975);
  }
  out.road_ids = fit.group_labels;
  out.road_mean_intercept = intercept_draws.colwise().mean().transpose();
  return out;
}

inline void write_roads_intercepts_csv(const SimulationSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::invalid_config, "cannot write " + path);
  out << "road_id,mean_intercept\n";
  for (std::size_t j = 0; j < s.road_ids.size(); ++j)
    out << s.road_ids[j] << ',' << csv::format_double(s.road_mean_intercept(static_cast<long>(j)))
        << "\n";
}

inline void write_fixed_intervals_csv(const SimulationSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::invalid_config, "cannot write " + path);
  out << "term,mean,lo,hi\n";
  for (std::size_t i = 0; i < s.terms.size(); ++i) {
    const long k = static_cast<long>(i);
    out << s.terms[i] << ',' << csv::format_double(s.mean(k)) << ','
        << csv::format_double(s.lo(k)) << ',' << csv::format_double(s.hi(k)) << "\n";
  }
}

}  // namespace hlogit
