// Command-line front end: generate synthetic data, fit models, compare them
// on a held-out split, simulate coefficient variability, evaluate fits, and
// compute ICC values. Every run writes a run.json echoing the resolved
// configuration; re-running with --from-config reproduces it exactly.

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hlogit/hlogit.hpp"

namespace fs = std::filesystem;
using hlogit::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNoConverge = 3;

int exit_code_for(hlogit::errc code) {
  using hlogit::errc;
  switch (code) {
    case errc::invalid_config:
    case errc::unknown_term:
    case errc::degenerate_split:
    case errc::unsupported_order:
    case errc::empty_comparison:
      return kUsage;
    case errc::not_converged:
    case errc::separation_detected:
      return kNoConverge;
    default:
      return kData;
  }
}

// All artifacts are written to a temp name and renamed into place, so a
// crashed run never leaves a half-written file behind.
void atomic_write(const fs::path& path, const std::function<void(const std::string&)>& writer) {
  fs::path tmp = path;
  tmp += ".tmp";
  writer(tmp.string());
  fs::rename(tmp, path);
}

void write_json_artifact(const json& j, const fs::path& path) {
  atomic_write(path, [&](const std::string& p) { hlogit::write_json_file(j, p); });
}

fs::path prepare_out_dir(const json& cfg) {
  const fs::path dir = cfg.at("out_dir").get<std::string>();
  fs::create_directories(dir);
  return dir;
}

void write_run_record(const std::string& command, const json& cfg, const fs::path& dir) {
  write_json_artifact(json{{"command", command}, {"parameters", cfg}}, dir / "run.json");
}

std::map<std::string, double> named_values(const json& obj) {
  std::map<std::string, double> out;
  for (const auto& [key, value] : obj.items()) out[key] = value.get<double>();
  return out;
}

json to_object(const std::map<std::string, double>& m) {
  json obj = json::object();
  for (const auto& [key, value] : m) obj[key] = value;
  return obj;
}

// "term=value" pairs from repeatable CLI flags.
std::map<std::string, double> parse_assignments(const std::vector<std::string>& raw,
                                                const std::string& flag) {
  std::map<std::string, double> out;
  for (const std::string& item : raw) {
    const auto eq = item.find('=');
    double value = 0.0;
    if (eq == std::string::npos ||
        !hlogit::csv::parse_double(item.substr(eq + 1), value))
      hlogit::fail(hlogit::errc::invalid_config,
                   flag + " expects term=value, got '" + item + "'");
    out[item.substr(0, eq)] = value;
  }
  return out;
}

hlogit::ModelSpec spec_for(const std::string& model, const std::vector<std::string>& terms,
                           const std::vector<std::string>& slopes, bool center) {
  using hlogit::ModelSpec;
  if (model == "null") return ModelSpec::resolved({}, true, {}, center);
  if (model == "glm") return ModelSpec::resolved(terms, false, {}, center);
  if (model == "ri") return ModelSpec::resolved(terms, true, {}, center);
  if (model == "rc")
    return ModelSpec::resolved(terms, true, slopes.empty() ? terms : slopes, center);
  hlogit::fail(hlogit::errc::invalid_config,
               "unknown model '" + model + "' (expected glm|null|ri|rc)");
}

hlogit::PredictMode mode_from(const std::string& name) {
  if (name == "conditional") return hlogit::PredictMode::conditional;
  if (name == "marginal") return hlogit::PredictMode::marginal;
  hlogit::fail(hlogit::errc::invalid_config,
               "unknown prediction mode '" + name + "' (expected conditional|marginal)");
}

hlogit::FitSettings fit_settings_from(const json& cfg) {
  hlogit::FitSettings s;
  if (cfg.contains("tolerance") && cfg.at("tolerance").get<double>() > 0.0)
    s.outer_rel_tolerance = cfg.at("tolerance").get<double>();
  return s;
}

// ---------------------------------------------------------------- generate

void apply_preset(const std::string& preset, json& cfg) {
  auto set = [&](const char* key, json value) { cfg[key] = std::move(value); };
  if (preset == "paper-like") {
    // 99 roads, ~19,956 crashes; effect sizes and variances typical of
    // road-nested severity data with a weak pavement random slope.
    set("roads", 99);
    set("n_total", 19956);
    set("per_road", 0);
    set("beta0", -0.653);
    set("beta", json{{"driver_no_university", 0.459},
                     {"driver_under_30", 0.261},
                     {"lighting_night", 0.118},
                     {"pavement_adverse", -0.339}});
    set("sigma0", std::sqrt(0.826));
    set("slope_sd", json{{"driver_no_university", std::sqrt(0.061)},
                         {"driver_under_30", std::sqrt(0.118)},
                         {"lighting_night", std::sqrt(0.110)},
                         {"pavement_adverse", std::sqrt(0.259)}});
  } else if (preset == "high-icc") {
    set("roads", 100);
    set("n_total", 0);
    set("per_road", 200);
    set("beta0", -0.7);
    set("beta", json{{"driver_no_university", 0.46},
                     {"driver_under_30", 0.26},
                     {"lighting_night", 0.12},
                     {"pavement_adverse", -0.34}});
    set("sigma0", std::sqrt(0.84));
    set("slope_sd", json{{"pavement_adverse", std::sqrt(0.26)}});
  } else if (preset == "small") {
    set("roads", 20);
    set("n_total", 0);
    set("per_road", 30);
    set("beta0", -0.7);
    set("beta", json::object());
    set("sigma0", std::sqrt(0.84));
    set("slope_sd", json::object());
  } else if (!preset.empty() && preset != "custom") {
    hlogit::fail(hlogit::errc::invalid_config,
                 "unknown preset '" + preset + "' (expected paper-like|high-icc|small)");
  }
}

int run_generate(const json& cfg) {
  hlogit::GeneratorConfig gc;
  gc.n_roads = cfg.at("roads").get<long>();
  gc.n_per_group = cfg.at("per_road").get<long>();
  gc.n_total = cfg.at("n_total").get<long>();
  gc.beta0 = cfg.at("beta0").get<double>();
  gc.sigma0 = cfg.at("sigma0").get<double>();
  gc.beta.clear();
  for (const auto& [term, value] : named_values(cfg.at("beta"))) gc.beta.emplace_back(term, value);
  gc.random_slope_sds.clear();
  for (const auto& [term, sd] : named_values(cfg.at("slope_sd")))
    gc.random_slope_sds.emplace_back(term, sd);
  gc.seed = cfg.at("seed").get<std::uint64_t>();

  const fs::path dir = prepare_out_dir(cfg);
  const hlogit::Dataset ds = hlogit::generate(gc);
  atomic_write(dir / "crashes.csv",
               [&](const std::string& p) { hlogit::write_crash_csv(ds, p); });
  atomic_write(dir / "roads.csv", [&](const std::string& p) { hlogit::write_road_csv(ds, p); });
  write_run_record("generate", cfg, dir);
  std::cout << "wrote " << (dir / "crashes.csv").string() << " (" << ds.records.size()
            << " rows) and " << (dir / "roads.csv").string() << " (" << ds.roads.size()
            << " roads)\n";
  return kOk;
}

// --------------------------------------------------------------------- fit

int run_fit(const json& cfg) {
  const std::string model = cfg.at("model").get<std::string>();
  const hlogit::ModelSpec spec =
      spec_for(model, cfg.at("terms").get<std::vector<std::string>>(),
               cfg.at("random_slopes").get<std::vector<std::string>>(),
               cfg.at("center").get<bool>());
  const hlogit::Dataset ds = hlogit::load_dataset(cfg.at("crash_csv").get<std::string>(),
                                                  cfg.at("road_csv").get<std::string>());
  const hlogit::DesignMatrices d = hlogit::encode_design(ds, spec);

  const fs::path dir = prepare_out_dir(cfg);
  json artifact;
  bool converged = true;
  if (model == "glm") {
    hlogit::GlmFit fit = hlogit::fit_glm(d);
    converged = fit.converged;
    artifact = hlogit::glm_to_json(fit, model);
  } else {
    hlogit::MixedFit fit = hlogit::fit_mixed(d, fit_settings_from(cfg));
    converged = fit.converged;
    artifact = hlogit::mixed_to_json(fit, model);
  }
  const fs::path out = dir / ("fit_" + model + ".json");
  write_json_artifact(artifact, out);
  write_run_record("fit", cfg, dir);
  std::cout << "wrote " << out.string() << " (converged=" << (converged ? "true" : "false")
            << ", deviance=" << artifact.at("fit").at("deviance").get<double>() << ")\n";
  return converged ? kOk : kNoConverge;
}

// ----------------------------------------------------------------- compare

int run_compare(const json& cfg) {
  const std::vector<std::string> models = cfg.at("models").get<std::vector<std::string>>();
  if (models.size() < 2)
    hlogit::fail(hlogit::errc::invalid_config, "compare needs at least two models");
  const double train_fraction = cfg.at("train_fraction").get<double>();
  const hlogit::Dataset ds = hlogit::load_dataset(cfg.at("crash_csv").get<std::string>(),
                                                  cfg.at("road_csv").get<std::string>());
  const auto [train, test] = hlogit::split(ds, train_fraction, cfg.at("seed").get<std::uint64_t>());

  const auto terms = cfg.at("terms").get<std::vector<std::string>>();
  const auto slopes = cfg.at("random_slopes").get<std::vector<std::string>>();
  const bool center = cfg.at("center").get<bool>();

  std::vector<hlogit::FittedModel> fits;
  bool converged = true;
  std::vector<hlogit::EvalReport> evals;
  for (const std::string& model : models) {
    const hlogit::ModelSpec spec = spec_for(model, terms, slopes, center);
    const hlogit::DesignMatrices dtrain = hlogit::encode_design(train, spec);
    hlogit::FittedModel fm;
    fm.name = model;
    hlogit::ModelSpec fitted_spec;
    if (model == "glm") {
      hlogit::GlmFit fit = hlogit::fit_glm(dtrain);
      converged = converged && fit.converged;
      fitted_spec = fit.spec;
      fm.fit = std::move(fit);
    } else {
      hlogit::MixedFit fit = hlogit::fit_mixed(dtrain, fit_settings_from(cfg));
      converged = converged && fit.converged;
      fitted_spec = fit.spec;
      fm.fit = std::move(fit);
    }
    const hlogit::DesignMatrices dtest = hlogit::encode_design(test, fitted_spec);
    const Eigen::VectorXd scores =
        hlogit::model_scores(fm, dtest, mode_from(cfg.at("mode").get<std::string>()));
    const double threshold = cfg.at("prevalence_matched").get<bool>()
                                 ? hlogit::threshold_for_prevalence(dtest.y, scores)
                                 : cfg.at("threshold").get<double>();
    evals.push_back(hlogit::evaluate_scores(dtest.y, scores, threshold));
    fits.push_back(std::move(fm));
  }

  hlogit::ComparisonReport rep;
  rep.models = std::move(fits);
  rep.evals = std::move(evals);
  rep.threshold = cfg.at("threshold").get<double>();
  rep.mode = mode_from(cfg.at("mode").get<std::string>());
  rep.prevalence_matched = cfg.at("prevalence_matched").get<bool>();

  const fs::path dir = prepare_out_dir(cfg);
  write_json_artifact(hlogit::comparison_to_json(rep), dir / "comparison.json");
  atomic_write(dir / "metrics.csv",
               [&](const std::string& p) { hlogit::write_metrics_csv(rep, p); });
  for (std::size_t k = 0; k < rep.models.size(); ++k)
    atomic_write(dir / ("roc_" + rep.models[k].name + ".csv"), [&](const std::string& p) {
      hlogit::write_roc_csv(rep.evals[k].roc, p);
    });
  write_run_record("compare", cfg, dir);
  std::cout << "wrote " << (dir / "comparison.json").string() << " for " << rep.models.size()
            << " models (train=" << train.records.size() << ", test=" << test.records.size()
            << ")\n";
  return converged ? kOk : kNoConverge;
}

// ---------------------------------------------------------------- simulate

int run_simulate(const json& cfg) {
  const json fit_json = hlogit::read_json_file(cfg.at("fit").get<std::string>());
  const hlogit::FittedModel fm = hlogit::fitted_model_from_json(fit_json);
  if (!std::holds_alternative<hlogit::MixedFit>(fm.fit))
    hlogit::fail(hlogit::errc::invalid_config,
                 "simulate needs a mixed-model fit (null, ri, or rc)");
  const hlogit::SimulationSummary summary = hlogit::simulate_coefficients(
      std::get<hlogit::MixedFit>(fm.fit), cfg.at("runs").get<long>(),
      cfg.at("seed").get<std::uint64_t>());

  const fs::path dir = prepare_out_dir(cfg);
  atomic_write(dir / "roads_intercepts.csv", [&](const std::string& p) {
    hlogit::write_roads_intercepts_csv(summary, p);
  });
  atomic_write(dir / "fixed_intervals.csv", [&](const std::string& p) {
    hlogit::write_fixed_intervals_csv(summary, p);
  });
  write_run_record("simulate", cfg, dir);
  std::cout << "wrote " << (dir / "roads_intercepts.csv").string() << " ("
            << summary.road_ids.size() << " roads) and "
            << (dir / "fixed_intervals.csv").string() << " (" << summary.terms.size()
            << " terms, " << summary.runs << " runs)\n";
  return kOk;
}

// ---------------------------------------------------------------- evaluate

int run_evaluate(const json& cfg) {
  const json fit_json = hlogit::read_json_file(cfg.at("fit").get<std::string>());
  const hlogit::FittedModel fm = hlogit::fitted_model_from_json(fit_json);
  const hlogit::ModelSpec spec = std::holds_alternative<hlogit::GlmFit>(fm.fit)
                                     ? std::get<hlogit::GlmFit>(fm.fit).spec
                                     : std::get<hlogit::MixedFit>(fm.fit).spec;
  const hlogit::Dataset ds = hlogit::load_dataset(cfg.at("crash_csv").get<std::string>(),
                                                  cfg.at("road_csv").get<std::string>());
  const hlogit::DesignMatrices d = hlogit::encode_design(ds, spec);
  const Eigen::VectorXd scores =
      hlogit::model_scores(fm, d, mode_from(cfg.at("mode").get<std::string>()));
  const double threshold = cfg.at("prevalence_matched").get<bool>()
                               ? hlogit::threshold_for_prevalence(d.y, scores)
                               : cfg.at("threshold").get<double>();
  const hlogit::EvalReport rep = hlogit::evaluate_scores(d.y, scores, threshold);

  const fs::path dir = prepare_out_dir(cfg);
  json out = hlogit::eval_to_json(rep);
  out["model"] = fm.name;
  out["n_rows"] = d.n;
  write_json_artifact(out, dir / "eval.json");
  atomic_write(dir / "roc.csv",
               [&](const std::string& p) { hlogit::write_roc_csv(rep.roc, p); });
  write_run_record("evaluate", cfg, dir);
  std::cout << "wrote " << (dir / "eval.json").string() << " (auc=" << out.at("auc").get<double>()
            << ")\n";
  return kOk;
}

// --------------------------------------------------------------------- icc

int run_icc(const json& cfg) {
  double sigma0_sq = 0.0;
  if (!cfg.at("fit").get<std::string>().empty()) {
    const json fit_json = hlogit::read_json_file(cfg.at("fit").get<std::string>());
    if (!fit_json.contains("random_effects"))
      hlogit::fail(hlogit::errc::invalid_config, "fit has no random effects to take ICC from");
    sigma0_sq = fit_json.at("random_effects").at("variance").at(0).get<double>();
  } else {
    sigma0_sq = cfg.at("sigma0_sq").get<double>();
  }
  const double value = hlogit::icc(sigma0_sq);

  const fs::path dir = prepare_out_dir(cfg);
  write_json_artifact(json{{"sigma0_sq", sigma0_sq},
                           {"level1_variance", hlogit::kLevel1Variance},
                           {"icc", value}},
                      dir / "icc.json");
  write_run_record("icc", cfg, dir);
  std::cout << "icc(" << sigma0_sq << ") = " << value << "\n";
  return kOk;
}

int dispatch(const std::string& command, const json& cfg) {
  if (command == "generate") return run_generate(cfg);
  if (command == "fit") return run_fit(cfg);
  if (command == "compare") return run_compare(cfg);
  if (command == "simulate") return run_simulate(cfg);
  if (command == "evaluate") return run_evaluate(cfg);
  if (command == "icc") return run_icc(cfg);
  hlogit::fail(hlogit::errc::invalid_config, "unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level logistic modeling of road-nested crash severity data"};
  app.require_subcommand(0, 1);

  std::string from_config;
  app.add_option("--from-config", from_config,
                 "Re-run the command recorded in a run.json file");

  // generate ---------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "Draw a synthetic crash/road dataset");
  std::string gen_preset;
  long gen_roads = 99, gen_per_road = 200, gen_n_total = 0;
  double gen_beta0 = -0.7, gen_sigma0 = std::sqrt(0.84);
  std::vector<std::string> gen_beta, gen_slope_sd;
  std::uint64_t gen_seed = 1;
  std::string gen_out = ".";
  gen->add_option("--preset", gen_preset, "paper-like | high-icc | small");
  gen->add_option("--roads", gen_roads, "Number of roads (level-2 units)");
  gen->add_option("--per-road", gen_per_road, "Crashes per road (ignored when --n-total > 0)");
  gen->add_option("--n-total", gen_n_total, "Total crashes, spread evenly across roads");
  gen->add_option("--beta0", gen_beta0, "True intercept");
  gen->add_option("--beta", gen_beta, "Fixed effect as term=value (repeatable)");
  gen->add_option("--sigma0", gen_sigma0, "Random-intercept SD");
  gen->add_option("--slope-sd", gen_slope_sd, "Random-slope SD as term=value (repeatable)");
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out-dir", gen_out, "Output directory");

  // fit ---------------------------------------------------------------------
  auto* fit = app.add_subcommand("fit", "Fit a model and write fit_<model>.json");
  std::string fit_crashes, fit_roads, fit_model = "ri";
  std::vector<std::string> fit_terms = {"education", "age", "light", "pavement"};
  std::vector<std::string> fit_slopes;
  bool fit_center = false;
  double fit_tolerance = 0.0;
  std::uint64_t fit_seed = 1;
  std::string fit_out = ".";
  fit->add_option("--crash-csv", fit_crashes, "Crash-level CSV")->required();
  fit->add_option("--road-csv", fit_roads, "Road-level CSV")->required();
  fit->add_option("--model", fit_model, "glm | null | ri | rc");
  fit->add_option("--terms", fit_terms, "Fixed-effect terms")->delimiter(',');
  fit->add_option("--random-slopes", fit_slopes, "Random-slope terms (rc; defaults to --terms)")
      ->delimiter(',');
  fit->add_flag("--center", fit_center, "Center road-level covariates");
  fit->add_option("--tolerance", fit_tolerance, "Override outer relative tolerance");
  fit->add_option("--seed", fit_seed, "RNG seed");
  fit->add_option("--out-dir", fit_out, "Output directory");

  // compare -------------------------------------------------------------------
  auto* cmp = app.add_subcommand("compare", "Train on a split, evaluate held-out predictions");
  std::string cmp_crashes, cmp_roads, cmp_mode = "conditional";
  std::vector<std::string> cmp_models = {"glm", "rc"};
  std::vector<std::string> cmp_terms = {"education", "age", "light", "pavement"};
  std::vector<std::string> cmp_slopes;
  bool cmp_center = false, cmp_prevalence = false;
  double cmp_fraction = 0.8, cmp_threshold = 0.5, cmp_tolerance = 0.0;
  std::uint64_t cmp_seed = 1;
  std::string cmp_out = ".";
  cmp->add_option("--crash-csv", cmp_crashes, "Crash-level CSV")->required();
  cmp->add_option("--road-csv", cmp_roads, "Road-level CSV")->required();
  cmp->add_option("--models", cmp_models, "Models to compare (glm|null|ri|rc)")->delimiter(',');
  cmp->add_option("--terms", cmp_terms, "Fixed-effect terms")->delimiter(',');
  cmp->add_option("--random-slopes", cmp_slopes, "Random-slope terms for rc")->delimiter(',');
  cmp->add_flag("--center", cmp_center, "Center road-level covariates");
  cmp->add_option("--train-fraction", cmp_fraction, "Training share, in (0, 1)");
  cmp->add_option("--threshold", cmp_threshold, "Classification cutoff");
  cmp->add_flag("--prevalence-matched", cmp_prevalence,
                "Match the predicted positive rate to the observed one");
  cmp->add_option("--mode", cmp_mode, "conditional | marginal");
  cmp->add_option("--tolerance", cmp_tolerance, "Override outer relative tolerance");
  cmp->add_option("--seed", cmp_seed, "Split RNG seed");
  cmp->add_option("--out-dir", cmp_out, "Output directory");

  // simulate -----------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Coefficient variability across roads from a fit");
  std::string sim_fit;
  long sim_runs = 200;
  std::uint64_t sim_seed = 1;
  std::string sim_out = ".";
  sim->add_option("--fit", sim_fit, "fit_<model>.json from a mixed fit")->required();
  sim->add_option("--runs", sim_runs, "Number of simulation draws");
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--out-dir", sim_out, "Output directory");

  // evaluate -----------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "Score a fit on a dataset");
  std::string ev_fit, ev_crashes, ev_roads, ev_mode = "conditional";
  double ev_threshold = 0.5;
  bool ev_prevalence = false;
  std::uint64_t ev_seed = 1;
  std::string ev_out = ".";
  ev->add_option("--fit", ev_fit, "fit_<model>.json")->required();
  ev->add_option("--crash-csv", ev_crashes, "Crash-level CSV")->required();
  ev->add_option("--road-csv", ev_roads, "Road-level CSV")->required();
  ev->add_option("--threshold", ev_threshold, "Classification cutoff");
  ev->add_flag("--prevalence-matched", ev_prevalence,
               "Match the predicted positive rate to the observed one");
  ev->add_option("--mode", ev_mode, "conditional | marginal");
  ev->add_option("--seed", ev_seed, "RNG seed (recorded; evaluation is deterministic)");
  ev->add_option("--out-dir", ev_out, "Output directory");

  // icc ------------------------------------------------------------------------
  auto* ic = app.add_subcommand("icc", "Intraclass correlation from a variance or a fit");
  double ic_sigma = -1.0;
  std::string ic_fit;
  std::string ic_out = ".";
  ic->add_option("--sigma0-sq", ic_sigma, "Random-intercept variance");
  ic->add_option("--fit", ic_fit, "Mixed fit JSON to read the variance from");
  ic->add_option("--out-dir", ic_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (!from_config.empty()) {
      const json record = hlogit::read_json_file(from_config);
      return dispatch(record.at("command").get<std::string>(), record.at("parameters"));
    }

    if (gen->parsed()) {
      json cfg{{"preset", gen_preset.empty() ? "custom" : gen_preset},
               {"roads", gen_roads},
               {"per_road", gen_per_road},
               {"n_total", gen_n_total},
               {"beta0", gen_beta0},
               {"beta", to_object(parse_assignments(gen_beta, "--beta"))},
               {"sigma0", gen_sigma0},
               {"slope_sd", to_object(parse_assignments(gen_slope_sd, "--slope-sd"))},
               {"seed", gen_seed},
               {"out_dir", gen_out}};
      if (!gen_preset.empty()) apply_preset(gen_preset, cfg);
      else if (gen_beta.empty()) {
        const hlogit::GeneratorConfig defaults;
        json beta = json::object();
        for (const auto& [term, value] : defaults.beta) beta[term] = value;
        cfg["beta"] = std::move(beta);
      }
      return run_generate(cfg);
    }
    if (fit->parsed())
      return run_fit(json{{"crash_csv", fit_crashes},
                          {"road_csv", fit_roads},
                          {"model", fit_model},
                          {"terms", fit_terms},
                          {"random_slopes", fit_slopes},
                          {"center", fit_center},
                          {"tolerance", fit_tolerance},
                          {"seed", fit_seed},
                          {"out_dir", fit_out}});
    if (cmp->parsed())
      return run_compare(json{{"crash_csv", cmp_crashes},
                              {"road_csv", cmp_roads},
                              {"models", cmp_models},
                              {"terms", cmp_terms},
                              {"random_slopes", cmp_slopes},
                              {"center", cmp_center},
                              {"train_fraction", cmp_fraction},
                              {"threshold", cmp_threshold},
                              {"prevalence_matched", cmp_prevalence},
                              {"mode", cmp_mode},
                              {"tolerance", cmp_tolerance},
                              {"seed", cmp_seed},
                              {"out_dir", cmp_out}});
    if (sim->parsed())
      return run_simulate(json{{"fit", sim_fit},
                               {"runs", sim_runs},
                               {"seed", sim_seed},
                               {"out_dir", sim_out}});
    if (ev->parsed())
      return run_evaluate(json{{"fit", ev_fit},
                               {"crash_csv", ev_crashes},
                               {"road_csv", ev_roads},
                               {"threshold", ev_threshold},
                               {"prevalence_matched", ev_prevalence},
                               {"mode", ev_mode},
                               {"seed", ev_seed},
                               {"out_dir", ev_out}});
    if (ic->parsed()) {
      if (ic_fit.empty() && ic_sigma < 0.0)
        hlogit::fail(hlogit::errc::invalid_config, "icc needs --sigma0-sq or --fit");
      return run_icc(json{{"sigma0_sq", ic_sigma}, {"fit", ic_fit}, {"out_dir", ic_out}});
    }

    std::cerr << app.help() << "\n";
    return kUsage;
  } catch (const hlogit::error& e) {
    std::cerr << "error [" << hlogit::errc_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error [BadArtifact]: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
}
