#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "hlogit/design.hpp"
#include "hlogit/errors.hpp"
#include "hlogit/numeric.hpp"

namespace hlogit {

struct GlmSettings {
  double tolerance = 1e-8;       // relative deviance change
  int max_iter = 50;
  double separation_guard = 30;  // |beta_k| beyond this signals separation
};

struct GlmFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  double log_likelihood = 0.0;
  double deviance = 0.0;
  long n_obs = 0;
  long n_params = 0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> column_names;
  ModelSpec spec;
};

inline double glm_log_likelihood(const DesignMatrices& d, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = d.X * beta;
  double ll = 0.0;
  for (long i = 0; i < d.n; ++i) ll += bernoulli_loglik(d.y(i), eta(i));
  return ll;
}

// Score vector X'(y - mu).
inline Eigen::VectorXd glm_score(const DesignMatrices& d, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = d.X * beta;
  Eigen::VectorXd r(d.n);
  for (long i = 0; i < d.n; ++i) r(i) = d.y(i) - inv_logit(eta(i));
  return d.X.transpose() * r;
}

// Maximum likelihood logistic regression by IRLS (Newton scoring) with
// step-halving whenever a proposal would increase the deviance.
inline GlmFit fit_glm(const DesignMatrices& d, const GlmSettings& settings = {}) {
  if (d.n == 0) fail(errc::empty_dataset, "empty design");
  if (!(settings.tolerance > 0.0) || settings.max_iter < 1)
    fail(errc::invalid_config, "tolerance must be > 0 and max_iter >= 1");

  const long n = d.n, p = d.p;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double dev_old = -2.0 * glm_log_likelihood(d, beta);

  GlmFit fit;
  fit.n_obs = n;
  fit.n_params = p;
  fit.column_names = d.column_names;
  fit.spec = d.spec;

  Eigen::MatrixXd info(p, p);
  auto newton_step = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = d.X * b;
    Eigen::VectorXd w(n), r(n);
    for (long i = 0; i < n; ++i) {
      const double mu = inv_logit(eta(i));
      w(i) = mu * (1.0 - mu);
      r(i) = d.y(i) - mu;
    }
    info = d.X.transpose() * w.asDiagonal() * d.X;
    const Eigen::VectorXd score = d.X.transpose() * r;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(info);
    qr.setThreshold(1e-10);
    if (qr.rank() < p)
      fail(errc::singular_information, "weighted normal equations are rank deficient");
    Eigen::VectorXd step = qr.solve(score);
    if (!step.allFinite())
      fail(errc::singular_information, "weighted normal equations are not solvable");
    return step;
  };

  bool deviance_monotone = true;
  for (int iter = 1; iter <= settings.max_iter; ++iter) {
    fit.iterations = iter;
    Eigen::VectorXd step = newton_step(beta);
    Eigen::VectorXd beta_new = beta + step;
    double dev_new = -2.0 * glm_log_likelihood(d, beta_new);
    for (int h = 0; h < 30 && !(dev_new <= dev_old); ++h) {
      step *= 0.5;
      beta_new = beta + step;
      dev_new = -2.0 * glm_log_likelihood(d, beta_new);
    }
    if (dev_new > dev_old) deviance_monotone = false;
    beta = beta_new;

    if (beta.cwiseAbs().maxCoeff() > settings.separation_guard && deviance_monotone)
      fail(errc::separation_detected,
           "coefficient magnitude exceeded " + std::to_string(settings.separation_guard) +
               "; responses appear (quasi-)separated");

    const double crit = std::abs(dev_new - dev_old) / (std::abs(dev_new) + 0.1);
    dev_old = dev_new;
    if (crit < settings.tolerance) {
      fit.converged = true;
      break;
    }
  }

  // Polish until the score equations hold tightly; Newton at the optimum is
  // idempotent so these steps are cheap no-ops once converged.
  for (int extra = 0; extra < 10; ++extra) {
    if (glm_score(d, beta).cwiseAbs().maxCoeff() <= 1e-9) break;
    beta += newton_step(beta);
  }

  fit.coefficients = beta;
  fit.log_likelihood = glm_log_likelihood(d, beta);
  fit.deviance = -2.0 * fit.log_likelihood;

  const Eigen::VectorXd eta = d.X * beta;
  Eigen::VectorXd w(n);
  for (long i = 0; i < n; ++i) {
    const double mu = inv_logit(eta(i));
    w(i) = mu * (1.0 - mu);
  }
  info = d.X.transpose() * w.asDiagonal() * d.X;
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return fit;
}

// Per-row fitted probabilities inverse-logit(X beta), strictly inside (0, 1).
inline Eigen::VectorXd predict_glm(const GlmFit& fit, const DesignMatrices& d) {
  if (d.p != fit.n_params)
    fail(errc::dimension_mismatch, "design has " + std::to_string(d.p) + " columns, fit expects " +
                                       std::to_string(fit.n_params));
  const Eigen::VectorXd eta = d.X * fit.coefficients;
  Eigen::VectorXd out(d.n);
  for (long i = 0; i < d.n; ++i) out(i) = inv_logit(eta(i));
  return out;
}

}  // namespace hlogit
