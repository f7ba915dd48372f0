#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "hlogit/errors.hpp"

namespace hlogit {

struct OptimSettings {
  double rel_tolerance = 1e-9;    // relative change in f between accepted steps
  double param_tolerance = 1e-8;  // max absolute parameter change
  int max_iter = 500;
  double gradient_step = 1e-5;    // central-difference scale, h = step * (1 + |x_i|)
  double max_step = 2.0;          // trust cap on the line-search direction norm
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimises f with BFGS on numeric central-difference gradients and an Armijo
// backtracking line search. Curvature updates are skipped when s'y is too
// small to keep the inverse Hessian positive definite; the search direction
// falls back to steepest descent if the BFGS direction is not a descent one.
inline OptimResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f,
                                 Eigen::VectorXd x0, const OptimSettings& s = {}) {
  const auto n = x0.size();
  auto gradient = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = s.gradient_step * (1.0 + std::abs(x(i)));
      xp(i) = x(i) + h;
      const double fp = f(xp);
      xp(i) = x(i) - h;
      const double fm = f(xp);
      xp(i) = x(i);
      g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
  };

  OptimResult res;
  res.x = std::move(x0);
  res.f = f(res.x);
  if (!std::isfinite(res.f)) fail(errc::invalid_config, "objective is not finite at the start");

  Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = gradient(res.x);

  for (int it = 0; it < s.max_iter; ++it) {
    res.iterations = it + 1;
    Eigen::VectorXd dir = -(Hinv * g);
    if (!dir.allFinite() || dir.dot(g) >= 0.0) {
      Hinv.setIdentity();
      dir = -g;
    }
    // A raw first direction can be huge on badly scaled problems; trust only
    // steps of bounded length and let the line search work inside that ball.
    const double dn = dir.norm();
    if (dn > s.max_step) dir *= s.max_step / dn;

    // Backtracking Armijo search.
    const double slope = dir.dot(g);
    double alpha = 1.0;
    double f_new = res.f;
    Eigen::VectorXd x_new = res.x;
    bool accepted = false;
    for (int half = 0; half < 50; ++half) {
      x_new = res.x + alpha * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // No descent at the noise floor of f: stationary if the gradient is
      // small on the scale of the objective.
      res.converged = g.lpNorm<Eigen::Infinity>() < 1e-5 * (1.0 + std::abs(res.f));
      return res;
    }

    const Eigen::VectorXd step = x_new - res.x;
    const double f_change = std::abs(res.f - f_new);
    const double denom = std::abs(res.f) + std::abs(f_new) + 1e-10;
    const Eigen::VectorXd g_new = gradient(x_new);
    const Eigen::VectorXd y = g_new - g;

    const double sy = step.dot(y);
    if (sy > 1e-12 * step.norm() * y.norm()) {
      const Eigen::VectorXd Hy = Hinv * y;
      const double yHy = y.dot(Hy);
      Hinv += ((sy + yHy) / (sy * sy)) * (step * step.transpose()) -
              (Hy * step.transpose() + step * Hy.transpose()) / sy;
    }

    res.x = x_new;
    res.f = f_new;
    g = g_new;

    if (2.0 * f_change / denom < s.rel_tolerance ||
        step.lpNorm<Eigen::Infinity>() < s.param_tolerance) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

}  // namespace hlogit
