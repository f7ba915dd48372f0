#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hlogit/design.hpp"
#include "hlogit/glm.hpp"
#include "hlogit/numeric.hpp"
#include "hlogit/optim.hpp"

namespace hlogit {

struct FitSettings {
  double inner_tolerance = 1e-9;       // relative penalized-deviance change
  double inner_gradient_tol = 1e-8;    // max-norm of the penalized score
  int inner_max_iter = 100;
  double outer_rel_tolerance = 1e-7;   // relative log-likelihood change
  double outer_param_tolerance = 1e-6; // max covariance-parameter change
  int outer_max_iter = 500;
  double theta_start = 0.5;            // initial SD for every random term
  double sigma_floor = 1e-6;           // diagonal Cholesky below this collapses to exact 0
  bool full_covariance = false;        // free lower triangle (correlated effects)
};

struct MixedFit {
  ModelSpec spec;
  std::vector<std::string> column_names;  // fixed-effect columns, element 0 = "(intercept)"
  Eigen::VectorXd fixed;
  Eigen::VectorXd fixed_std_errors;
  Eigen::MatrixXd vcov_fixed;

  std::vector<std::string> random_terms;  // "(intercept)", then slope columns
  Eigen::MatrixXd cholesky;               // estimated L, q x q lower triangular
  Eigen::MatrixXd covariance;             // L L'
  Eigen::VectorXd variance_components;    // diag(L L')

  // Conditional modes/sds live in the spherical u-space (b_j = L u_j); rows
  // follow group_labels. sds are sqrt(diag(H_j^-1)) from the Laplace Hessian.
  Eigen::MatrixXd conditional_modes;
  Eigen::MatrixXd conditional_sds;
  std::vector<std::string> group_labels;

  double log_likelihood = 0.0;
  double deviance = 0.0;  // -2 * log_likelihood
  long n_obs = 0;
  long n_groups = 0;
  long n_params = 0;      // fixed effects + free covariance parameters
  bool converged = false;
  bool boundary = false;  // some random-effect variance collapsed to (near) zero
  int outer_iterations = 0;

  // Random effects on the linear-predictor scale: row j is (L u_j)'.
  Eigen::MatrixXd group_effects() const { return conditional_modes * cholesky.transpose(); }
};

// Intraclass correlation for the latent-response formulation of the logistic
// model: between-road variance against the level-1 logistic variance pi^2/3.
inline double icc(double sigma0_sq) {
  if (sigma0_sq < 0.0) fail(errc::negative_variance, "intercept variance must be >= 0");
  return sigma0_sq / (sigma0_sq + kLevel1Variance);
}

inline double icc(const MixedFit& fit) { return icc(fit.variance_components(0)); }

inline InfoCriteria information_criteria(const GlmFit& fit) {
  return information_criteria_from(fit.deviance, fit.n_params, fit.n_obs);
}

inline InfoCriteria information_criteria(const MixedFit& fit) {
  return information_criteria_from(fit.deviance, fit.n_params, fit.n_obs);
}

namespace detail {

// Precomputed per-fit structures. Group ordinals are assigned by first row
// appearance, so iterating 0..J-1 keeps every reduction independent of how
// groups are labelled (bitwise, not just to rounding).
struct MixedWork {
  const DesignMatrices& d;
  Eigen::MatrixXd Z;                    // n x q, row i = z_i'
  std::vector<std::vector<long>> rows;  // row indices per group ordinal

  explicit MixedWork(const DesignMatrices& dm) : d(dm), Z(dm.n, dm.q()), rows(static_cast<std::size_t>(dm.J)) {
    for (long i = 0; i < d.n; ++i) {
      Z.row(i) = d.z_row(i).transpose();
      rows[static_cast<std::size_t>(d.group_index(i))].push_back(i);
    }
  }
  long q() const { return d.q(); }
};

// Maps the unconstrained outer parameter vector to the Cholesky factor L.
// Diagonal entries are exp-transformed with a hard floor to exact zero so a
// collapsed variance removes its term instead of chasing -infinity.
struct ThetaMap {
  long q = 1;
  bool full = false;
  double floor_ = 1e-6;

  long size() const { return full ? q * (q + 1) / 2 : q; }

  Eigen::MatrixXd unpack(const Eigen::VectorXd& t) const {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(q, q);
    for (long k = 0; k < q; ++k) {
      const double s = std::exp(std::min(t(k), 15.0));
      L(k, k) = s < floor_ ? 0.0 : s;
    }
    if (full) {
      long idx = q;
      for (long r = 1; r < q; ++r)
        for (long c = 0; c < r; ++c) L(r, c) = t(idx++);
    }
    return L;
  }
};

struct InnerState {
  Eigen::VectorXd beta;
  Eigen::MatrixXd U;  // J x q
};

struct InnerResult {
  bool ok = false;         // arithmetic stayed finite and steps were solvable
  bool converged = false;
  double penalized_loglik = -std::numeric_limits<double>::infinity();
  double laplace_loglik = -std::numeric_limits<double>::infinity();
  int iterations = 0;
};

inline double penalized_loglik_at(const MixedWork& w, const Eigen::MatrixXd& L,
                                  const InnerState& st, Eigen::VectorXd* eta_out = nullptr) {
  const DesignMatrices& d = w.d;
  Eigen::VectorXd eta = d.X * st.beta;
  for (long j = 0; j < d.J; ++j) {
    const Eigen::VectorXd b = L * st.U.row(j).transpose();
    for (long i : w.rows[static_cast<std::size_t>(j)]) eta(i) += w.Z.row(i).dot(b);
  }
  double pl = 0.0;
  for (long i = 0; i < d.n; ++i) pl += bernoulli_loglik(d.y(i), eta(i));
  for (long j = 0; j < d.J; ++j) pl -= 0.5 * st.U.row(j).squaredNorm();
  if (eta_out) *eta_out = std::move(eta);
  return pl;
}

// Joint Newton (PIRLS) over (beta, u_1..u_J) at a fixed Cholesky factor.
// The blocked Hessian is eliminated per group through the Schur complement
// S = X'WX - sum_j B_j A_j^-1 B_j', so cost stays linear in J. The penalized
// problem is strictly concave in u and concave in beta, so monotone
// step-halving converges from any start. When `store_A` is given the final
// per-group Laplace Hessians A_j = L'Z_j'W_jZ_jL + I are written there.
inline InnerResult inner_pirls(const MixedWork& w, const Eigen::MatrixXd& L, InnerState& st,
                               const FitSettings& s, double gradient_tol,
                               std::vector<Eigen::MatrixXd>* store_A = nullptr) {
  const DesignMatrices& d = w.d;
  const long p = d.p, q = w.q(), J = d.J;
  InnerResult res;

  Eigen::VectorXd eta;
  double pl = penalized_loglik_at(w, L, st, &eta);
  if (!std::isfinite(pl)) return res;

  Eigen::VectorXd mu(d.n), wt(d.n), r(d.n);
  std::vector<Eigen::MatrixXd> A(static_cast<std::size_t>(J));
  std::vector<Eigen::MatrixXd> B(static_cast<std::size_t>(J));
  std::vector<Eigen::VectorXd> gu(static_cast<std::size_t>(J));
  std::vector<Eigen::LLT<Eigen::MatrixXd>> Allt(static_cast<std::size_t>(J));

  for (int it = 0; it < s.inner_max_iter; ++it) {
    res.iterations = it + 1;
    for (long i = 0; i < d.n; ++i) {
      mu(i) = inv_logit(eta(i));
      wt(i) = mu(i) * (1.0 - mu(i));
      r(i) = d.y(i) - mu(i);
    }
    Eigen::VectorXd gb = d.X.transpose() * r;
    double max_grad = gb.size() > 0 ? gb.cwiseAbs().maxCoeff() : 0.0;

    Eigen::MatrixXd S = d.X.transpose() * wt.asDiagonal() * d.X;
    Eigen::VectorXd rb = gb;
    for (long j = 0; j < J; ++j) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(q, q);
      Eigen::MatrixXd N = Eigen::MatrixXd::Zero(p, q);
      Eigen::VectorXd zr = Eigen::VectorXd::Zero(q);
      for (long i : w.rows[static_cast<std::size_t>(j)]) {
        const auto z = w.Z.row(i).transpose();
        M.noalias() += wt(i) * z * z.transpose();
        N.noalias() += wt(i) * d.X.row(i).transpose() * z.transpose();
        zr.noalias() += r(i) * z;
      }
      const std::size_t js = static_cast<std::size_t>(j);
      A[js] = L.transpose() * M * L + Eigen::MatrixXd::Identity(q, q);
      B[js] = N * L;
      gu[js] = L.transpose() * zr - st.U.row(j).transpose();
      max_grad = std::max(max_grad, gu[js].cwiseAbs().maxCoeff());

      Allt[js].compute(A[js]);
      if (Allt[js].info() != Eigen::Success) return res;
      S.noalias() -= B[js] * Allt[js].solve(B[js].transpose());
      rb.noalias() -= B[js] * Allt[js].solve(gu[js]);
    }

    const bool grad_ok = max_grad <= gradient_tol || max_grad <= 1e-13;
    if (it > 0 && res.converged && grad_ok) break;  // res.converged set by last step's size
    if (grad_ok && it == 0) {
      res.converged = true;
      break;
    }

    Eigen::LDLT<Eigen::MatrixXd> Sldlt(S);
    Eigen::VectorXd db = Sldlt.solve(rb);
    if (!db.allFinite()) return res;
    Eigen::MatrixXd dU(J, q);
    for (long j = 0; j < J; ++j) {
      const std::size_t js = static_cast<std::size_t>(j);
      dU.row(j) = Allt[js].solve(gu[js] - B[js].transpose() * db).transpose();
    }
    if (!dU.allFinite()) return res;

    // Monotone ascent via step-halving on the penalized log-likelihood.
    double alpha = 1.0;
    InnerState trial;
    double pl_new = pl;
    bool accepted = false;
    for (int half = 0; half < 30; ++half) {
      trial.beta = st.beta + alpha * db;
      trial.U = st.U + alpha * dU;
      pl_new = penalized_loglik_at(w, L, trial, &eta);
      if (std::isfinite(pl_new) && pl_new >= pl - 1e-14 * (std::abs(pl) + 1.0)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.converged = max_grad <= std::max(gradient_tol, 1e-6);
      pl = penalized_loglik_at(w, L, st, &eta);  // restore eta for the final A pass
      break;
    }
    const double dev_change = 2.0 * std::abs(pl_new - pl);
    res.converged = dev_change / (std::abs(2.0 * pl_new) + 0.1) < s.inner_tolerance;
    st = std::move(trial);
    pl = pl_new;
  }

  // Final curvature pass at the converged state for the Laplace correction.
  for (long i = 0; i < d.n; ++i) {
    const double m = inv_logit(eta(i));
    wt(i) = m * (1.0 - m);
  }
  double logdet_sum = 0.0;
  for (long j = 0; j < J; ++j) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(q, q);
    for (long i : w.rows[static_cast<std::size_t>(j)]) {
      const auto z = w.Z.row(i).transpose();
      M.noalias() += wt(i) * z * z.transpose();
    }
    Eigen::MatrixXd Aj = L.transpose() * M * L + Eigen::MatrixXd::Identity(q, q);
    Eigen::LLT<Eigen::MatrixXd> llt(Aj);
    if (llt.info() != Eigen::Success) return res;
    for (long k = 0; k < q; ++k) logdet_sum += 2.0 * std::log(llt.matrixL()(k, k));
    if (store_A) (*store_A)[static_cast<std::size_t>(j)] = std::move(Aj);
  }

  res.ok = std::isfinite(pl) && std::isfinite(logdet_sum);
  res.penalized_loglik = pl;
  res.laplace_loglik = pl - 0.5 * logdet_sum;
  return res;
}

// Laplace log-likelihood as a function of beta alone (theta fixed): per-group
// Newton over u only. Used for the observed-information standard errors.
inline double laplace_loglik_at_beta(const MixedWork& w, const Eigen::MatrixXd& L,
                                     const Eigen::VectorXd& beta, Eigen::MatrixXd& U) {
  const DesignMatrices& d = w.d;
  const long q = w.q();
  const Eigen::VectorXd eta0 = d.X * beta;
  double total = 0.0;
  for (long j = 0; j < d.J; ++j) {
    const auto& rows = w.rows[static_cast<std::size_t>(j)];
    Eigen::VectorXd u = U.row(j).transpose();

    auto eval = [&](const Eigen::VectorXd& uu, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) {
      const Eigen::VectorXd b = L * uu;
      double f = -0.5 * uu.squaredNorm();
      if (grad) *grad = -uu;
      if (hess) *hess = Eigen::MatrixXd::Identity(q, q);
      for (long i : rows) {
        const double eta = eta0(i) + w.Z.row(i).dot(b);
        f += bernoulli_loglik(d.y(i), eta);
        const double m = inv_logit(eta);
        if (grad) grad->noalias() += (d.y(i) - m) * (L.transpose() * w.Z.row(i).transpose());
        if (hess) {
          const Eigen::VectorXd lz = L.transpose() * w.Z.row(i).transpose();
          hess->noalias() += (m * (1.0 - m)) * lz * lz.transpose();
        }
      }
      return f;
    };

    Eigen::VectorXd g(q);
    Eigen::MatrixXd H(q, q);
    double f = eval(u, &g, &H);
    for (int it = 0; it < 200; ++it) {
      if (g.cwiseAbs().maxCoeff() <= 1e-10) break;
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      Eigen::VectorXd step = llt.solve(g);
      double alpha = 1.0;
      for (int half = 0; half < 30; ++half) {
        const Eigen::VectorXd trial = u + alpha * step;
        const double f_new = eval(trial, nullptr, nullptr);
        if (std::isfinite(f_new) && f_new >= f - 1e-14 * (std::abs(f) + 1.0)) {
          u = trial;
          break;
        }
        alpha *= 0.5;
      }
      f = eval(u, &g, &H);
    }
    U.row(j) = u.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    double logdet = 0.0;
    for (long k = 0; k < q; ++k) logdet += 2.0 * std::log(llt.matrixL()(k, k));
    total += f - 0.5 * logdet;
  }
  return total;
}

}  // namespace detail

// Two-level logistic model with a random intercept and optional random
// slopes, estimated by maximising the Laplace-approximated marginal
// likelihood. The covariance factor is optimised by quasi-Newton on an
// unconstrained scale while (beta, u) are profiled out by the inner PIRLS;
// at L = 0 the objective equals the plain logistic log-likelihood exactly,
// so collapsing variances degrade gracefully to the fixed-effects model.
inline MixedFit fit_mixed(const DesignMatrices& d, const FitSettings& settings = {}) {
  if (d.n == 0) fail(errc::empty_dataset, "empty design");
  if (!d.spec.random_intercept)
    fail(errc::invalid_config, "mixed model requires a random intercept");
  if (d.J < 2)
    fail(errc::insufficient_groups,
         "need at least 2 groups, got " + std::to_string(d.J));
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
    qr.setThreshold(1e-10);
    if (qr.rank() < d.p) fail(errc::singular_information, "fixed-effect design is rank deficient");
  }

  detail::MixedWork work(d);
  const long p = d.p, q = d.q(), J = d.J;

  detail::ThetaMap tmap{q, settings.full_covariance, settings.sigma_floor};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(tmap.size());
  for (long k = 0; k < q; ++k) theta(k) = std::log(settings.theta_start);

  detail::InnerState state;
  state.U = Eigen::MatrixXd::Zero(J, q);
  try {
    state.beta = fit_glm(d).coefficients;
  } catch (const error&) {
    state.beta = Eigen::VectorXd::Zero(p);  // e.g. separation: start from the prior mean
  }

  // Profile objective: -loglik(theta), with (beta, u) re-solved from the last
  // accepted state. The inner problem is convex, so warm starts only speed
  // things up; unsolvable or non-finite points report +inf and the line
  // search backs away.
  auto objective = [&](const Eigen::VectorXd& t) {
    const Eigen::MatrixXd L = tmap.unpack(t);
    detail::InnerState trial = state;
    detail::InnerResult r =
        detail::inner_pirls(work, L, trial, settings, settings.inner_gradient_tol);
    if (!r.ok) return std::numeric_limits<double>::infinity();
    // Keep the warm start only when the inner solve fully converged, so a
    // wild line-search probe cannot poison later evaluations.
    if (r.converged) state = std::move(trial);
    return -r.laplace_loglik;
  };

  OptimSettings os;
  os.rel_tolerance = settings.outer_rel_tolerance;
  os.param_tolerance = settings.outer_param_tolerance;
  os.max_iter = settings.outer_max_iter;
  OptimResult outer = minimize_bfgs(objective, theta, os);

  const Eigen::MatrixXd L = tmap.unpack(outer.x);
  std::vector<Eigen::MatrixXd> A(static_cast<std::size_t>(J));
  detail::InnerResult fin = detail::inner_pirls(work, L, state, settings, 1e-10, &A);
  if (!fin.ok) fail(errc::not_converged, "inner solve failed at the final covariance estimate");

  MixedFit fit;
  fit.spec = d.spec;
  fit.column_names = d.column_names;
  fit.group_labels = d.group_labels;
  fit.fixed = state.beta;
  fit.cholesky = L;
  fit.covariance = L * L.transpose();
  fit.variance_components = fit.covariance.diagonal();
  fit.random_terms.push_back("(intercept)");
  for (int c : d.Z_cols) fit.random_terms.push_back(d.column_names[static_cast<std::size_t>(c)]);
  fit.conditional_modes = state.U;
  fit.conditional_sds = Eigen::MatrixXd::Ones(J, q);
  for (long j = 0; j < J; ++j) {
    const Eigen::MatrixXd Ainv =
        A[static_cast<std::size_t>(j)].llt().solve(Eigen::MatrixXd::Identity(q, q));
    fit.conditional_sds.row(j) = Ainv.diagonal().cwiseSqrt().transpose();
  }
  fit.log_likelihood = fin.laplace_loglik;
  fit.deviance = -2.0 * fin.laplace_loglik;
  fit.n_obs = d.n;
  fit.n_groups = J;
  fit.n_params = p + tmap.size();
  fit.converged = outer.converged && fin.converged;
  fit.outer_iterations = outer.iterations;
  fit.boundary = (fit.variance_components.array() < 1e-4).any();

  // Observed information for beta at theta-hat by central differences of the
  // Laplace objective, with the modes re-solved at every evaluation.
  Eigen::MatrixXd U = state.U;
  auto ll_beta = [&](const Eigen::VectorXd& b) {
    return detail::laplace_loglik_at_beta(work, L, b, U);
  };
  Eigen::MatrixXd info(p, p);
  const double f0 = ll_beta(fit.fixed);
  Eigen::VectorXd h(p);
  for (long i = 0; i < p; ++i) h(i) = 1e-3 * (1.0 + std::abs(fit.fixed(i)));
  for (long i = 0; i < p; ++i) {
    Eigen::VectorXd b = fit.fixed;
    b(i) = fit.fixed(i) + h(i);
    const double fp = ll_beta(b);
    b(i) = fit.fixed(i) - h(i);
    const double fm = ll_beta(b);
    info(i, i) = -(fp - 2.0 * f0 + fm) / (h(i) * h(i));
    for (long k = 0; k < i; ++k) {
      Eigen::VectorXd bb = fit.fixed;
      bb(i) += h(i); bb(k) += h(k);
      const double fpp = ll_beta(bb);
      bb(k) -= 2.0 * h(k);
      const double fpm = ll_beta(bb);
      bb(i) -= 2.0 * h(i);
      const double fmm = ll_beta(bb);
      bb(k) += 2.0 * h(k);
      const double fmp = ll_beta(bb);
      info(i, k) = info(k, i) = -(fpp - fpm - fmp + fmm) / (4.0 * h(i) * h(k));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  const double lam_floor = 1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(lam_floor);
  fit.vcov_fixed = es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  fit.fixed_std_errors = fit.vcov_fixed.diagonal().cwiseSqrt();
  return fit;
}

// Variance-components-only model: intercept plus a random intercept. The
// usual starting point for deciding whether road-level clustering matters.
inline MixedFit fit_null(const Dataset& ds, const FitSettings& settings = {}) {
  ModelSpec spec;
  spec.random_intercept = true;
  return fit_mixed(encode_design(ds, spec), settings);
}

enum class PredictMode { conditional, marginal };

// Probabilities for a design encoded with the same model spec. Conditional
// predictions add each road's estimated effect; roads never seen in training
// fall back to the population effect (u = 0), as does marginal mode.
inline Eigen::VectorXd predict_mixed(const MixedFit& fit, const DesignMatrices& d,
                                     PredictMode mode = PredictMode::conditional) {
  if (d.p != fit.fixed.size() || d.column_names != fit.column_names)
    fail(errc::dimension_mismatch, "design columns do not match the fitted model");
  Eigen::VectorXd eta = d.X * fit.fixed;
  if (mode == PredictMode::conditional) {
    if (d.q() != fit.cholesky.rows())
      fail(errc::dimension_mismatch, "random-effect structure does not match the fitted model");
    std::map<std::string, long> index;
    for (std::size_t j = 0; j < fit.group_labels.size(); ++j)
      index[fit.group_labels[j]] = static_cast<long>(j);
    std::vector<long> lookup(static_cast<std::size_t>(d.J), -1);
    for (long g = 0; g < d.J; ++g) {
      auto it = index.find(d.group_labels[static_cast<std::size_t>(g)]);
      if (it != index.end()) lookup[static_cast<std::size_t>(g)] = it->second;
    }
    const Eigen::MatrixXd effects = fit.group_effects();  // J_fit x q
    for (long i = 0; i < d.n; ++i) {
      const long j = lookup[static_cast<std::size_t>(d.group_index(i))];
      if (j >= 0) eta(i) += d.z_row(i).dot(effects.row(j));
    }
  }
  Eigen::VectorXd prob(d.n);
  for (long i = 0; i < d.n; ++i) prob(i) = inv_logit(eta(i));
  return prob;
}

}  // namespace hlogit
