#pragma once

#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "hlogit/csv.hpp"
#include "hlogit/errors.hpp"
#include "hlogit/metrics.hpp"
#include "hlogit/mixed.hpp"
#include "json.hpp"

namespace hlogit {

using json = nlohmann::ordered_json;

namespace detail {

inline json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<long>(i)) = a[i].get<double>();
  return v;
}

inline Eigen::MatrixXd mat_from_json(const json& a) {
  const long rows = static_cast<long>(a.size());
  const long cols = rows > 0 ? static_cast<long>(a[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c)
      m(r, c) = a[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  return m;
}

// Eval numbers are serialized with 6 significant digits.
inline double sig6(double x) { return std::stod(csv::format_sig6(x)); }

inline json opt_sig6(const std::optional<double>& v) {
  return v ? json(sig6(*v)) : json(nullptr);
}

inline std::string stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

inline json coefficients_block(const std::vector<std::string>& names, const Eigen::VectorXd& est,
                               const Eigen::VectorXd& se) {
  json arr = json::array();
  for (long i = 0; i < est.size(); ++i) {
    const double z = se(i) > 0.0 ? est(i) / se(i) : 0.0;
    const double p = wald_p_value(z);
    arr.push_back({{"term", names[static_cast<std::size_t>(i)]},
                   {"estimate", est(i)},
                   {"std_error", se(i)},
                   {"z", z},
                   {"p", p},
                   {"stars", stars(p)}});
  }
  return arr;
}

}  // namespace detail

inline json spec_to_json(const ModelSpec& s) {
  json centers = json::object();
  for (const auto& [term, value] : s.road_covariate_centers) centers[term] = value;
  return {{"fixed_terms", s.fixed_terms},
          {"random_intercept", s.random_intercept},
          {"random_slope_terms", s.random_slope_terms},
          {"center_road_covariates", s.center_road_covariates},
          {"road_covariate_centers", centers}};
}

inline ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.fixed_terms = j.at("fixed_terms").get<std::vector<std::string>>();
  s.random_intercept = j.at("random_intercept").get<bool>();
  s.random_slope_terms = j.at("random_slope_terms").get<std::vector<std::string>>();
  s.center_road_covariates = j.at("center_road_covariates").get<bool>();
  for (const auto& [key, value] : j.at("road_covariate_centers").items())
    s.road_covariate_centers[key] = value.get<double>();
  return s;
}

inline json glm_to_json(const GlmFit& fit, const std::string& model_name = "glm") {
  const InfoCriteria ic = information_criteria(fit);
  return {{"model", model_name},
          {"spec", spec_to_json(fit.spec)},
          {"coefficients",
           detail::coefficients_block(fit.column_names, fit.coefficients, fit.std_errors)},
          {"fit",
           {{"log_likelihood", fit.log_likelihood},
            {"deviance", fit.deviance},
            {"aic", ic.aic},
            {"bic", ic.bic},
            {"n_obs", fit.n_obs},
            {"n_params", fit.n_params},
            {"converged", fit.converged},
            {"iterations", fit.iterations}}}};
}

inline GlmFit glm_from_json(const json& j) {
  GlmFit fit;
  fit.spec = spec_from_json(j.at("spec"));
  std::vector<double> est, se;
  for (const auto& c : j.at("coefficients")) {
    fit.column_names.push_back(c.at("term").get<std::string>());
    est.push_back(c.at("estimate").get<double>());
    se.push_back(c.at("std_error").get<double>());
  }
  fit.coefficients = Eigen::Map<Eigen::VectorXd>(est.data(), static_cast<long>(est.size()));
  fit.std_errors = Eigen::Map<Eigen::VectorXd>(se.data(), static_cast<long>(se.size()));
  const json& f = j.at("fit");
  fit.log_likelihood = f.at("log_likelihood").get<double>();
  fit.deviance = f.at("deviance").get<double>();
  fit.n_obs = f.at("n_obs").get<long>();
  fit.n_params = f.at("n_params").get<long>();
  fit.converged = f.at("converged").get<bool>();
  fit.iterations = f.at("iterations").get<int>();
  return fit;
}

inline json mixed_to_json(const MixedFit& fit, const std::string& model_name) {
  const InfoCriteria ic = information_criteria(fit);
  json groups = json::array();
  const Eigen::MatrixXd effects = fit.group_effects();
  for (long j = 0; j < fit.n_groups; ++j) {
    groups.push_back({{"road_id", fit.group_labels[static_cast<std::size_t>(j)]},
                      {"mode", detail::vec_to_json(fit.conditional_modes.row(j).transpose())},
                      {"sd", detail::vec_to_json(fit.conditional_sds.row(j).transpose())},
                      {"effect", detail::vec_to_json(effects.row(j).transpose())}});
  }
  json out = {
      {"model", model_name},
      {"spec", spec_to_json(fit.spec)},
      {"coefficients",
       detail::coefficients_block(fit.column_names, fit.fixed, fit.fixed_std_errors)},
      {"random_effects",
       {{"structure", fit.random_terms.size() > 1 ? "intercept+slopes" : "intercept"},
        {"terms", fit.random_terms},
        {"variance", detail::vec_to_json(fit.variance_components)},
        {"sd", detail::vec_to_json(fit.variance_components.cwiseSqrt())},
        {"cholesky", detail::mat_to_json(fit.cholesky)}}},
      {"icc",
       {{"value", icc(fit)},
        {"sigma0_sq", fit.variance_components(0)},
        {"level1_variance", kLevel1Variance}}},
      {"fit",
       {{"log_likelihood", fit.log_likelihood},
        {"deviance", fit.deviance},
        {"aic", ic.aic},
        {"bic", ic.bic},
        {"n_obs", fit.n_obs},
        {"n_groups", fit.n_groups},
        {"n_params", fit.n_params},
        {"converged", fit.converged},
        {"boundary", fit.boundary},
        {"outer_iterations", fit.outer_iterations}}},
      {"groups", std::move(groups)},
      {"vcov_fixed", detail::mat_to_json(fit.vcov_fixed)}};
  return out;
}

inline MixedFit mixed_from_json(const json& j) {
  MixedFit fit;
  fit.spec = spec_from_json(j.at("spec"));
  std::vector<double> est, se;
  for (const auto& c : j.at("coefficients")) {
    fit.column_names.push_back(c.at("term").get<std::string>());
    est.push_back(c.at("estimate").get<double>());
    se.push_back(c.at("std_error").get<double>());
  }
  fit.fixed = Eigen::Map<Eigen::VectorXd>(est.data(), static_cast<long>(est.size()));
  fit.fixed_std_errors = Eigen::Map<Eigen::VectorXd>(se.data(), static_cast<long>(se.size()));

  const json& re = j.at("random_effects");
  fit.random_terms = re.at("terms").get<std::vector<std::string>>();
  fit.variance_components = detail::vec_from_json(re.at("variance"));
  fit.cholesky = detail::mat_from_json(re.at("cholesky"));
  fit.covariance = fit.cholesky * fit.cholesky.transpose();

  const json& f = j.at("fit");
  fit.log_likelihood = f.at("log_likelihood").get<double>();
  fit.deviance = f.at("deviance").get<double>();
  fit.n_obs = f.at("n_obs").get<long>();
  fit.n_groups = f.at("n_groups").get<long>();
  fit.n_params = f.at("n_params").get<long>();
  fit.converged = f.at("converged").get<bool>();
  fit.boundary = f.at("boundary").get<bool>();
  fit.outer_iterations = f.at("outer_iterations").get<int>();

  const json& groups = j.at("groups");
  const long J = static_cast<long>(groups.size());
  const long q = fit.cholesky.rows();
  fit.conditional_modes = Eigen::MatrixXd::Zero(J, q);
  fit.conditional_sds = Eigen::MatrixXd::Ones(J, q);
  for (long g = 0; g < J; ++g) {
    const json& row = groups[static_cast<std::size_t>(g)];
    fit.group_labels.push_back(row.at("road_id").get<std::string>());
    fit.conditional_modes.row(g) = detail::vec_from_json(row.at("mode")).transpose();
    fit.conditional_sds.row(g) = detail::vec_from_json(row.at("sd")).transpose();
  }
  fit.vcov_fixed = detail::mat_from_json(j.at("vcov_fixed"));
  return fit;
}

inline json fitted_model_to_json(const FittedModel& m) {
  if (std::holds_alternative<GlmFit>(m.fit)) return glm_to_json(std::get<GlmFit>(m.fit), m.name);
  return mixed_to_json(std::get<MixedFit>(m.fit), m.name);
}

inline FittedModel fitted_model_from_json(const json& j) {
  FittedModel m;
  m.name = j.at("model").get<std::string>();
  if (j.contains("random_effects")) m.fit = mixed_from_json(j);
  else m.fit = glm_from_json(j);
  return m;
}

inline json eval_to_json(const EvalReport& e) {
  return {{"threshold", e.threshold},
          {"counts", {{"tp", e.counts.tp}, {"fp", e.counts.fp}, {"tn", e.counts.tn}, {"fn", e.counts.fn}}},
          {"accuracy", detail::sig6(e.metrics.accuracy)},
          {"precision", detail::opt_sig6(e.metrics.precision)},
          {"recall", detail::opt_sig6(e.metrics.recall)},
          {"f1", detail::opt_sig6(e.metrics.f1)},
          {"auc", detail::sig6(e.auc)}};
}

// One report carrying both the coefficient/variance summary and the held-out
// classification metrics for every model, side by side.
inline json comparison_to_json(const ComparisonReport& rep) {
  json models = json::array();
  for (std::size_t k = 0; k < rep.models.size(); ++k) {
    json m = fitted_model_to_json(rep.models[k]);
    m["evaluation"] = eval_to_json(rep.evals[k]);
    models.push_back(std::move(m));
  }
  return {{"threshold", rep.threshold},
          {"prediction_mode", rep.mode == PredictMode::conditional ? "conditional" : "marginal"},
          {"prevalence_matched", rep.prevalence_matched},
          {"models", std::move(models)}};
}

inline void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::invalid_config, "cannot write " + path);
  out << j.dump(2) << "\n";
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::invalid_config, "cannot open " + path);
  return json::parse(in);
}

}  // namespace hlogit
