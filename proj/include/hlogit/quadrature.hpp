#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "hlogit/csv.hpp"
#include "hlogit/design.hpp"
#include "hlogit/errors.hpp"
#include "hlogit/numeric.hpp"

namespace hlogit {

// Gauss-Hermite rule for the weight function exp(-x^2).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> log_scaled_weights;  // log(w_k * exp(t_k^2)), tail-safe
  int m = 0;
};

// Golub-Welsch nodes: eigenvalues of the symmetric tridiagonal Jacobi matrix
// (zero diagonal, off-diagonal sqrt(k/2)). Weights come from the Christoffel
// function, w_k = exp(-t_k^2) / sum_{j<m} psi_j(t_k)^2 over orthonormal
// Hermite functions psi_j, all O(1) inside the node range. Eigenvector-based
// weights lose all relative accuracy in the far tail (absolute error ~eps),
// which the exp(t^2) rescaling of a recentred rule amplifies catastrophically
// at high order; the Christoffel form gives log(w e^{t^2}) = -log sum psi^2
// with no cancellation at all.
inline QuadratureRule ghq_rule(int m) {
  if (m < 1 || m > 101) fail(errc::unsupported_order, "order must be in [1, 101]");
  const double sqrt_pi = std::sqrt(M_PI);
  QuadratureRule rule;
  rule.m = m;
  if (m == 1) {
    rule.nodes = {0.0};
    rule.weights = {sqrt_pi};
    rule.log_scaled_weights = {std::log(sqrt_pi)};
    return rule;
  }
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sub(m - 1);
  for (int k = 1; k < m; ++k) sub(k - 1) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  rule.nodes.resize(static_cast<std::size_t>(m));
  rule.weights.resize(static_cast<std::size_t>(m));
  rule.log_scaled_weights.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const std::size_t ks = static_cast<std::size_t>(k);
    const double t = es.eigenvalues()(k);
    double prev = 0.0;
    double cur = std::pow(M_PI, -0.25) * std::exp(-0.5 * t * t);
    double sum_sq = 0.0;
    for (int j = 0; j < m; ++j) {
      sum_sq += cur * cur;
      const double next = t * std::sqrt(2.0 / (j + 1)) * cur - std::sqrt(j / (j + 1.0)) * prev;
      prev = cur;
      cur = next;
    }
    rule.nodes[ks] = t;
    rule.log_scaled_weights[ks] = -std::log(sum_sq);
    rule.weights[ks] = std::exp(-t * t) / sum_sq;
  }
  return rule;
}

namespace detail {

struct GroupSlice {
  std::vector<long> rows;
};

// Row indices per group, in order of first appearance. Group ordinals with no
// rows still get a (empty) slice so they contribute a prior-only term.
inline std::vector<GroupSlice> group_slices_by_appearance(const DesignMatrices& d,
                                                          std::vector<int>* order = nullptr) {
  std::vector<GroupSlice> slices(static_cast<std::size_t>(d.J));
  std::vector<int> seen_order;
  std::vector<bool> seen(static_cast<std::size_t>(d.J), false);
  for (long i = 0; i < d.n; ++i) {
    const int g = d.group_index(i);
    if (g < 0 || g >= d.J) fail(errc::dimension_mismatch, "group ordinal out of range");
    if (!seen[static_cast<std::size_t>(g)]) {
      seen[static_cast<std::size_t>(g)] = true;
      seen_order.push_back(g);
    }
    slices[static_cast<std::size_t>(g)].rows.push_back(i);
  }
  for (int g = 0; g < d.J; ++g)
    if (!seen[static_cast<std::size_t>(g)]) seen_order.push_back(g);
  if (order) *order = seen_order;
  return slices;
}

}  // namespace detail

// Marginal log-likelihood of the random-intercept model evaluated by
// Gauss-Hermite quadrature:
//   sum_j log Integral prod_i Bernoulli(y_ij | invlogit(x'beta + sigma0 u)) phi(u) du.
// Adaptive mode recentres each group's integral at its conditional mode with
// curvature scaling, which keeps modest node counts accurate for large groups.
inline double ghq_loglik(const DesignMatrices& d, const Eigen::VectorXd& beta, double sigma0,
                         int m, bool adaptive = true) {
  if (beta.size() != d.p)
    fail(errc::dimension_mismatch, "beta has " + std::to_string(beta.size()) +
                                       " entries, design has p = " + std::to_string(d.p));
  if (!d.Z_cols.empty())
    fail(errc::dimension_mismatch, "quadrature oracle handles the random intercept only (q = 1)");
  if (sigma0 < 0.0) fail(errc::negative_variance, "sigma0 must be >= 0");

  const QuadratureRule rule = ghq_rule(m);
  const Eigen::VectorXd eta0 = d.X * beta;
  const double sqrt2 = std::sqrt(2.0);
  const double half_log_2pi = 0.5 * std::log(2.0 * M_PI);

  std::vector<int> order;
  const auto slices = detail::group_slices_by_appearance(d, &order);

  double total = 0.0;
  std::vector<double> terms(rule.nodes.size());
  for (int g : order) {
    const auto& rows = slices[static_cast<std::size_t>(g)].rows;

    // G(u) = group log-likelihood at offset sigma0*u minus the u^2/2 penalty.
    auto G = [&](double u) {
      double s = -0.5 * u * u;
      for (long i : rows) s += bernoulli_loglik(d.y(i), eta0(i) + sigma0 * u);
      return s;
    };

    double center = 0.0, scale = 1.0;
    if (adaptive) {
      double u = 0.0;
      for (int it = 0; it < 100; ++it) {
        double g1 = -u, g2 = -1.0;
        for (long i : rows) {
          const double mu = inv_logit(eta0(i) + sigma0 * u);
          g1 += sigma0 * (d.y(i) - mu);
          g2 -= sigma0 * sigma0 * mu * (1.0 - mu);
        }
        const double step = g1 / g2;
        u -= step;
        if (std::abs(g1) < 1e-12) break;
      }
      double h = 1.0;
      for (long i : rows) {
        const double mu = inv_logit(eta0(i) + sigma0 * u);
        h += sigma0 * sigma0 * mu * (1.0 - mu);
      }
      center = u;
      scale = 1.0 / std::sqrt(h);
    }

    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      const double t = rule.nodes[k];
      terms[k] = rule.log_scaled_weights[k] + G(center + sqrt2 * scale * t);
    }
    total += -half_log_2pi + std::log(sqrt2 * scale) + logsumexp(terms);
  }
  return total;
}

// Profile of the quadrature log-likelihood on a (beta0, sigma0) grid around a
// fitted point; used to audit whether a fit sits at the grid maximum.
struct GridCheckReport {
  struct Point {
    double beta0;
    double sigma0;
    double loglik;
  };
  std::vector<Point> points;        // row-major over the (beta0, sigma0) grid
  int steps = 0;
  double center_loglik = 0.0;
  double best_loglik = 0.0;
  double best_beta0 = 0.0;
  double best_sigma0 = 0.0;
  int cell_distance = 0;            // Chebyshev index distance, center to max
  bool optimal = false;             // max within one grid cell of the center
};

inline GridCheckReport grid_refit_check(const DesignMatrices& d, const Eigen::VectorXd& beta_hat,
                                        double sigma0_hat, double radius, int steps,
                                        int quad_nodes = 25) {
  if (steps < 1) fail(errc::invalid_config, "steps must be >= 1");
  if (radius < 0.0) fail(errc::invalid_config, "radius must be >= 0");

  GridCheckReport rep;
  rep.steps = steps;
  const std::vector<double> b_grid = linspace(beta_hat(0) - radius, beta_hat(0) + radius, steps);
  std::vector<double> s_grid = linspace(sigma0_hat - radius, sigma0_hat + radius, steps);
  for (double& s : s_grid) s = std::max(0.0, s);

  int center_b = 0, center_s = 0;
  for (int i = 0; i < steps; ++i) {
    if (std::abs(b_grid[static_cast<std::size_t>(i)] - beta_hat(0)) <
        std::abs(b_grid[static_cast<std::size_t>(center_b)] - beta_hat(0)))
      center_b = i;
    if (std::abs(s_grid[static_cast<std::size_t>(i)] - sigma0_hat) <
        std::abs(s_grid[static_cast<std::size_t>(center_s)] - sigma0_hat))
      center_s = i;
  }

  Eigen::VectorXd beta = beta_hat;
  int best_i = 0, best_k = 0;
  for (int i = 0; i < steps; ++i) {
    beta(0) = b_grid[static_cast<std::size_t>(i)];
    for (int k = 0; k < steps; ++k) {
      const double ll = ghq_loglik(d, beta, s_grid[static_cast<std::size_t>(k)], quad_nodes, true);
      rep.points.push_back({beta(0), s_grid[static_cast<std::size_t>(k)], ll});
      if (rep.points.size() == 1 || ll > rep.best_loglik) {
        rep.best_loglik = ll;
        rep.best_beta0 = beta(0);
        rep.best_sigma0 = s_grid[static_cast<std::size_t>(k)];
        best_i = i;
        best_k = k;
      }
      if (i == center_b && k == center_s) rep.center_loglik = ll;
    }
  }
  rep.cell_distance = std::max(std::abs(best_i - center_b), std::abs(best_k - center_s));
  rep.optimal = rep.cell_distance <= 1;
  return rep;
}

inline void write_grid_csv(const GridCheckReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::invalid_config, "cannot write " + path);
  out << "beta0,sigma0,loglik\n";
  for (const auto& pt : rep.points)
    out << csv::format_double(pt.beta0) << ',' << csv::format_double(pt.sigma0) << ','
        << csv::format_double(pt.loglik) << "\n";
}

}  // namespace hlogit
