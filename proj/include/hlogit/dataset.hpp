#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hlogit/csv.hpp"
#include "hlogit/errors.hpp"
#include "hlogit/rng.hpp"

namespace hlogit {

// One crash-level observation. `severity` is 1 for injury/fatality and 0 for
// property-damage-only; all other flags are 0/1 indicators.
struct CrashRecord {
  std::string crash_id;
  std::string road_id;
  int severity = 0;
  int lighting_night = 0;
  int pavement_adverse = 0;
  int geometry_curve = 0;
  int weather_adverse = 0;
  int driver_no_university = 0;
  int driver_under_30 = 0;
  int driver_male = 0;
};

// Road-level covariates shared by every crash on that road.
struct RoadProfile {
  std::string road_id;
  double aadt = 0.0;                // vehicles/day, must be > 0
  double access_density = 0.0;      // entry/exit points per km
  double heavy_vehicle_ratio = 0.0; // in [0, 1]
};

struct Dataset {
  std::vector<CrashRecord> records;
  std::map<std::string, RoadProfile> roads;

  // Ingestion bookkeeping: rows dropped for missing/unparseable fields.
  long dropped_rows = 0;
  std::vector<std::string> drop_diagnostics;

  std::size_t n() const { return records.size(); }

  std::size_t distinct_roads_used() const {
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.road_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids.size();
  }
};

inline const std::vector<std::string>& crash_csv_header() {
  static const std::vector<std::string> h = {
      "crash_id",       "road_id",
      "severity",       "lighting_night",
      "pavement_adverse", "geometry_curve",
      "weather_adverse", "driver_no_university",
      "driver_under_30", "driver_male"};
  return h;
}

inline const std::vector<std::string>& road_csv_header() {
  static const std::vector<std::string> h = {"road_id", "aadt", "access_density",
                                             "heavy_vehicle_ratio"};
  return h;
}

namespace detail {

inline bool is_missing_cell(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan";
}

inline void require_header(const csv::Table& t, const std::vector<std::string>& expected,
                           const std::string& path) {
  for (const auto& name : expected)
    if (t.column(name) < 0) fail(errc::missing_column, "column '" + name + "' missing in " + path);
}

// 0/1 flag cell. Returns false when the cell is missing/unparseable (row is
// dropped by the caller); throws on values outside {0,1}.
inline bool read_binary(const std::string& cell, const std::string& column, long row, int& out) {
  if (is_missing_cell(cell)) return false;
  long v = 0;
  if (!csv::parse_long(cell, v)) return false;
  if (v != 0 && v != 1)
    fail(errc::invalid_binary_value,
         "row " + std::to_string(row) + ": " + column + " = '" + cell + "' (expected 0 or 1)");
  out = static_cast<int>(v);
  return true;
}

}  // namespace detail

// Loads and validates the crash/road pair of CSV files. Rows with missing or
// unparseable fields are dropped and counted (never imputed); domain
// violations (non-binary flags, unknown road keys, aadt <= 0) are errors.
inline Dataset load_dataset(const std::string& crash_csv_path, const std::string& road_csv_path) {
  Dataset ds;

  const csv::Table roads = csv::read_file(road_csv_path);
  detail::require_header(roads, road_csv_header(), road_csv_path);
  const int rc_id = roads.column("road_id");
  const int rc_aadt = roads.column("aadt");
  const int rc_acc = roads.column("access_density");
  const int rc_hvr = roads.column("heavy_vehicle_ratio");
  long row_no = 1;
  for (const auto& cells : roads.rows) {
    ++row_no;
    RoadProfile rp;
    rp.road_id = cells.at(rc_id);
    bool ok = !detail::is_missing_cell(rp.road_id) &&
              csv::parse_double(cells.at(rc_aadt), rp.aadt) &&
              csv::parse_double(cells.at(rc_acc), rp.access_density) &&
              csv::parse_double(cells.at(rc_hvr), rp.heavy_vehicle_ratio);
    if (!ok) {
      ++ds.dropped_rows;
      ds.drop_diagnostics.push_back(road_csv_path + " row " + std::to_string(row_no) +
                                    ": missing or unparseable field");
      continue;
    }
    if (rp.aadt <= 0.0)
      fail(errc::non_positive_aadt,
           "row " + std::to_string(row_no) + ": aadt = " + cells.at(rc_aadt));
    if (rp.access_density < 0.0 || rp.heavy_vehicle_ratio < 0.0 || rp.heavy_vehicle_ratio > 1.0)
      fail(errc::invalid_config, "row " + std::to_string(row_no) + ": road covariate out of range");
    ds.roads[rp.road_id] = rp;
  }

  const csv::Table crashes = csv::read_file(crash_csv_path);
  detail::require_header(crashes, crash_csv_header(), crash_csv_path);
  const int c_id = crashes.column("crash_id");
  const int c_road = crashes.column("road_id");
  struct BinCol {
    int idx;
    const char* name;
    int CrashRecord::* field;
  };
  const BinCol bins[] = {
      {crashes.column("severity"), "severity", &CrashRecord::severity},
      {crashes.column("lighting_night"), "lighting_night", &CrashRecord::lighting_night},
      {crashes.column("pavement_adverse"), "pavement_adverse", &CrashRecord::pavement_adverse},
      {crashes.column("geometry_curve"), "geometry_curve", &CrashRecord::geometry_curve},
      {crashes.column("weather_adverse"), "weather_adverse", &CrashRecord::weather_adverse},
      {crashes.column("driver_no_university"), "driver_no_university",
       &CrashRecord::driver_no_university},
      {crashes.column("driver_under_30"), "driver_under_30", &CrashRecord::driver_under_30},
      {crashes.column("driver_male"), "driver_male", &CrashRecord::driver_male},
  };

  row_no = 1;
  for (const auto& cells : crashes.rows) {
    ++row_no;
    CrashRecord rec;
    rec.crash_id = cells.at(c_id);
    rec.road_id = cells.at(c_road);
    if (detail::is_missing_cell(rec.crash_id) || detail::is_missing_cell(rec.road_id)) {
      ++ds.dropped_rows;
      ds.drop_diagnostics.push_back(crash_csv_path + " row " + std::to_string(row_no) +
                                    ": missing identifier");
      continue;
    }
    bool ok = true;
    for (const auto& b : bins) {
      if (!detail::read_binary(cells.at(b.idx), b.name, row_no, rec.*(b.field))) {
        ok = false;
        ds.drop_diagnostics.push_back(crash_csv_path + " row " + std::to_string(row_no) + ": " +
                                      b.name + " missing or unparseable");
        break;
      }
    }
    if (!ok) {
      ++ds.dropped_rows;
      continue;
    }
    if (!ds.roads.count(rec.road_id))
      fail(errc::unresolved_road_id,
           "row " + std::to_string(row_no) + ": road_id '" + rec.road_id + "' not in road table");
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

inline void write_crash_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::invalid_config, "cannot write " + path);
  const auto& h = crash_csv_header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << "\n";
  for (const auto& r : ds.records) {
    out << r.crash_id << ',' << r.road_id << ',' << r.severity << ',' << r.lighting_night << ','
        << r.pavement_adverse << ',' << r.geometry_curve << ',' << r.weather_adverse << ','
        << r.driver_no_university << ',' << r.driver_under_30 << ',' << r.driver_male << "\n";
  }
}

inline void write_road_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(errc::invalid_config, "cannot write " + path);
  const auto& h = road_csv_header();
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << "\n";
  for (const auto& [id, rp] : ds.roads) {
    out << id << ',' << csv::format_double(rp.aadt) << ',' << csv::format_double(rp.access_density)
        << ',' << csv::format_double(rp.heavy_vehicle_ratio) << "\n";
  }
}

// Crash-level uniform random split: a seeded permutation of the stable record
// order, first floor(n * train_fraction) records become the training set.
// Both partitions share the full roads map.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    fail(errc::degenerate_split, "train_fraction must be in (0, 1)");
  const std::size_t n = ds.records.size();
  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
  if (n_train == 0 || n_train == n)
    fail(errc::degenerate_split, "split leaves an empty partition (n = " + std::to_string(n) + ")");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
    std::swap(order[i], order[j]);
  }

  Dataset train, test;
  train.roads = ds.roads;
  test.roads = ds.roads;
  train.records.reserve(n_train);
  test.records.reserve(n - n_train);
  for (std::size_t k = 0; k < n; ++k)
    (k < n_train ? train : test).records.push_back(ds.records[order[k]]);
  return {std::move(train), std::move(test)};
}

}  // namespace hlogit
