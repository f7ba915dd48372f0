#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "hlogit/dataset.hpp"
#include "hlogit/errors.hpp"

namespace hlogit {

enum class TermLevel { crash, road };

struct TermInfo {
  std::string name;   // canonical column name
  TermLevel level;
  bool continuous;    // continuous road-level covariates may be centered
};

// Canonical covariate registry. Short aliases mirror the variable names used
// in reports ("education", "age", "light", "pavement", ...).
inline const std::vector<TermInfo>& term_registry() {
  static const std::vector<TermInfo> reg = {
      {"lighting_night", TermLevel::crash, false},
      {"pavement_adverse", TermLevel::crash, false},
      {"geometry_curve", TermLevel::crash, false},
      {"weather_adverse", TermLevel::crash, false},
      {"driver_no_university", TermLevel::crash, false},
      {"driver_under_30", TermLevel::crash, false},
      {"driver_male", TermLevel::crash, false},
      {"aadt_log", TermLevel::road, true},
      {"access_density", TermLevel::road, true},
      {"heavy_vehicle_ratio", TermLevel::road, true},
  };
  return reg;
}

inline std::string resolve_term(const std::string& name) {
  static const std::map<std::string, std::string> aliases = {
      {"light", "lighting_night"},       {"lighting", "lighting_night"},
      {"pavement", "pavement_adverse"},  {"geometry", "geometry_curve"},
      {"curve", "geometry_curve"},       {"weather", "weather_adverse"},
      {"education", "driver_no_university"},
      {"age", "driver_under_30"},        {"gender", "driver_male"},
      {"male", "driver_male"},           {"aadt", "aadt_log"},
      {"aadt.log", "aadt_log"},
  };
  auto it = aliases.find(name);
  const std::string canonical = it == aliases.end() ? name : it->second;
  for (const auto& t : term_registry())
    if (t.name == canonical) return canonical;
  fail(errc::unknown_term, "'" + name + "' is not a known covariate");
}

inline const TermInfo& term_info(const std::string& canonical) {
  for (const auto& t : term_registry())
    if (t.name == canonical) return t;
  fail(errc::unknown_term, canonical);
}

// Model formula: ordered fixed terms, optional random intercept, and the
// subset of fixed terms whose slopes vary by road.
struct ModelSpec {
  std::vector<std::string> fixed_terms;
  bool random_intercept = false;
  std::vector<std::string> random_slope_terms;
  bool center_road_covariates = false;
  // Filled at encoding time when centering is on; reused verbatim afterwards
  // so train and test designs share the same shift.
  std::map<std::string, double> road_covariate_centers;

  void validate() const {
    for (const auto& s : random_slope_terms) {
      bool found = false;
      for (const auto& f : fixed_terms) found = found || f == s;
      if (!found) fail(errc::unknown_term, "random slope '" + s + "' is not a fixed term");
    }
    if (!random_slope_terms.empty() && !random_intercept)
      fail(errc::invalid_config, "random slopes require a random intercept");
  }

  static ModelSpec resolved(const std::vector<std::string>& fixed, bool random_intercept,
                            const std::vector<std::string>& slopes,
                            bool center_road_covariates = false) {
    ModelSpec ms;
    for (const auto& f : fixed) ms.fixed_terms.push_back(resolve_term(f));
    for (const auto& s : slopes) ms.random_slope_terms.push_back(resolve_term(s));
    ms.random_intercept = random_intercept;
    ms.center_road_covariates = center_road_covariates;
    ms.validate();
    return ms;
  }
};

// Encoded response/design pair. Column 0 of X is the intercept; group ordinals
// follow first appearance in record order; Z_cols indexes the X columns that
// carry random slopes (the random intercept is implicit).
struct DesignMatrices {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  Eigen::VectorXi group_index;
  std::vector<int> Z_cols;
  long n = 0;
  long J = 0;
  long p = 0;
  std::vector<std::string> column_names;  // length p, element 0 = "(intercept)"
  std::vector<std::string> group_labels;  // road ids by ordinal
  ModelSpec spec;                          // resolved spec (centers filled in)

  long q() const { return 1 + static_cast<long>(Z_cols.size()); }

  // Random-effect row for observation i: (1, X(i, Z_cols...)).
  Eigen::VectorXd z_row(long i) const {
    Eigen::VectorXd z(q());
    z(0) = 1.0;
    for (std::size_t k = 0; k < Z_cols.size(); ++k) z(static_cast<long>(k) + 1) = X(i, Z_cols[k]);
    return z;
  }
};

inline double covariate_value(const CrashRecord& rec, const RoadProfile& road,
                              const std::string& term) {
  if (term == "lighting_night") return rec.lighting_night;
  if (term == "pavement_adverse") return rec.pavement_adverse;
  if (term == "geometry_curve") return rec.geometry_curve;
  if (term == "weather_adverse") return rec.weather_adverse;
  if (term == "driver_no_university") return rec.driver_no_university;
  if (term == "driver_under_30") return rec.driver_under_30;
  if (term == "driver_male") return rec.driver_male;
  if (term == "aadt_log") return std::log(road.aadt);
  if (term == "access_density") return road.access_density;
  if (term == "heavy_vehicle_ratio") return road.heavy_vehicle_ratio;
  fail(errc::unknown_term, term);
}

inline DesignMatrices encode_design(const Dataset& ds, const ModelSpec& spec_in) {
  if (ds.records.empty()) fail(errc::empty_dataset, "no records to encode");
  ModelSpec spec = spec_in;
  for (auto& t : spec.fixed_terms) t = resolve_term(t);
  for (auto& t : spec.random_slope_terms) t = resolve_term(t);
  spec.validate();

  if (spec.center_road_covariates && spec.road_covariate_centers.empty()) {
    // Across-road means (one value per road, not per crash).
    for (const auto& t : spec.fixed_terms) {
      const TermInfo& info = term_info(t);
      if (info.level != TermLevel::road || !info.continuous) continue;
      double sum = 0.0;
      for (const auto& [id, rp] : ds.roads)
        sum += covariate_value(CrashRecord{}, rp, t);
      spec.road_covariate_centers[t] = sum / static_cast<double>(ds.roads.size());
    }
  }

  DesignMatrices d;
  d.spec = spec;
  d.n = static_cast<long>(ds.records.size());
  d.p = 1 + static_cast<long>(spec.fixed_terms.size());
  d.y.resize(d.n);
  d.X.resize(d.n, d.p);
  d.group_index.resize(d.n);
  d.column_names.push_back("(intercept)");
  for (const auto& t : spec.fixed_terms) d.column_names.push_back(t);

  std::map<std::string, int> ordinals;
  for (long i = 0; i < d.n; ++i) {
    const CrashRecord& rec = ds.records[static_cast<std::size_t>(i)];
    auto road_it = ds.roads.find(rec.road_id);
    if (road_it == ds.roads.end())
      fail(errc::unresolved_road_id, "record " + rec.crash_id + ": road '" + rec.road_id + "'");
    const RoadProfile& road = road_it->second;

    d.y(i) = rec.severity;
    d.X(i, 0) = 1.0;
    for (std::size_t k = 0; k < spec.fixed_terms.size(); ++k) {
      const std::string& t = spec.fixed_terms[k];
      double v = covariate_value(rec, road, t);
      auto c = spec.road_covariate_centers.find(t);
      if (c != spec.road_covariate_centers.end()) v -= c->second;
      d.X(i, static_cast<long>(k) + 1) = v;
    }

    auto [it, inserted] = ordinals.try_emplace(rec.road_id, static_cast<int>(d.group_labels.size()));
    if (inserted) d.group_labels.push_back(rec.road_id);
    d.group_index(i) = it->second;
  }
  d.J = static_cast<long>(d.group_labels.size());

  for (const auto& s : spec.random_slope_terms) {
    for (long c = 1; c < d.p; ++c)
      if (d.column_names[static_cast<std::size_t>(c)] == s) {
        d.Z_cols.push_back(static_cast<int>(c));
        break;
      }
  }
  return d;
}

}  // namespace hlogit
