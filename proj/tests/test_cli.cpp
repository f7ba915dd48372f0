#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "testutil.hpp"

using namespace hlogit;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& dir) {
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + HLOGIT_CLI_PATH + "\" " + args + " > " +
                          out_file.string() + " 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testutil::slurp(out_file);
  r.err = testutil::slurp(err_file);
  return r;
}

// One generated dataset shared by the fit/compare/simulate/evaluate tests.
const fs::path& data_dir() {
  static const fs::path dir = [] {
    fs::path d = testutil::scratch_dir("cli_data");
    CliResult r = run_cli("generate --preset small --seed 4 --out-dir " + d.string(), d);
    if (r.exit_code != 0) throw std::runtime_error("generate failed:\n" + r.err);
    return d;
  }();
  return dir;
}

std::string data_args() {
  return " --crash-csv " + (data_dir() / "crashes.csv").string() + " --road-csv " +
         (data_dir() / "roads.csv").string();
}

}  // namespace

TEST_CASE("generate is byte-identical across runs and from-config replays", "[cli]") {
  auto dir1 = testutil::scratch_dir("cli_gen1");
  auto dir2 = testutil::scratch_dir("cli_gen2");

  CliResult a = run_cli("generate --preset small --seed 9 --out-dir " + dir1.string(), dir1);
  CliResult b = run_cli("generate --preset small --seed 9 --out-dir " + dir2.string(), dir2);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(a.out.find("wrote") != std::string::npos);

  const std::string crashes1 = testutil::slurp(dir1 / "crashes.csv");
  REQUIRE_FALSE(crashes1.empty());
  CHECK(crashes1 == testutil::slurp(dir2 / "crashes.csv"));
  CHECK(testutil::slurp(dir1 / "roads.csv") == testutil::slurp(dir2 / "roads.csv"));
  // run.json records the out-dir, so compare everything but that field.
  nlohmann::json run1 = nlohmann::json::parse(testutil::slurp(dir1 / "run.json"));
  nlohmann::json run2 = nlohmann::json::parse(testutil::slurp(dir2 / "run.json"));
  run1["parameters"].erase("out_dir");
  run2["parameters"].erase("out_dir");
  CHECK(run1 == run2);

  // Replaying the recorded run.json reproduces the artifacts exactly.
  fs::copy_file(dir1 / "crashes.csv", dir1 / "crashes_first.csv");
  CliResult replay = run_cli("--from-config " + (dir1 / "run.json").string(), dir1);
  REQUIRE(replay.exit_code == 0);
  CHECK(testutil::slurp(dir1 / "crashes.csv") == testutil::slurp(dir1 / "crashes_first.csv"));

  // A different seed must change the data.
  auto dir3 = testutil::scratch_dir("cli_gen3");
  CliResult c = run_cli("generate --preset small --seed 10 --out-dir " + dir3.string(), dir3);
  REQUIRE(c.exit_code == 0);
  CHECK(crashes1 != testutil::slurp(dir3 / "crashes.csv"));
}

TEST_CASE("fit writes a model artifact with the expected blocks", "[cli]") {
  auto dir = testutil::scratch_dir("cli_fit");

  SECTION("null model carries an ICC block") {
    CliResult r = run_cli("fit" + data_args() + " --model null --out-dir " + dir.string(), dir);
    REQUIRE(r.exit_code == 0);
    json j = read_json_file((dir / "fit_null.json").string());
    CHECK(j.at("model") == "null");
    CHECK(j.at("coefficients").size() == 1);
    const double v = j.at("icc").at("value").get<double>();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(j.at("fit").at("converged").get<bool>());
    CHECK(read_json_file((dir / "run.json").string()).at("command") == "fit");
  }

  SECTION("random-coefficient model reports one variance per random term") {
    CliResult r = run_cli("fit" + data_args() +
                              " --model rc --terms light,pavement --random-slopes pavement"
                              " --out-dir " + dir.string(),
                          dir);
    REQUIRE(r.exit_code == 0);
    json j = read_json_file((dir / "fit_rc.json").string());
    CHECK(j.at("random_effects").at("terms").size() == 2);
    CHECK(j.at("random_effects").at("variance").size() == 2);
    CHECK(j.at("random_effects").at("structure") == "intercept+slopes");
    CHECK(j.at("coefficients").size() == 3);
  }

  SECTION("glm model omits the random-effects block") {
    CliResult r = run_cli("fit" + data_args() + " --model glm --terms light --out-dir " +
                              dir.string(),
                          dir);
    REQUIRE(r.exit_code == 0);
    json j = read_json_file((dir / "fit_glm.json").string());
    CHECK_FALSE(j.contains("random_effects"));
  }
}

TEST_CASE("compare runs end to end and reproduces itself", "[cli]") {
  auto dir1 = testutil::scratch_dir("cli_cmp1");
  auto dir2 = testutil::scratch_dir("cli_cmp2");
  const std::string base = "compare" + data_args() +
                           " --models glm,ri --terms light,pavement --seed 3 --out-dir ";

  CliResult a = run_cli(base + dir1.string(), dir1);
  REQUIRE(a.exit_code == 0);
  CliResult b = run_cli(base + dir2.string(), dir2);
  REQUIRE(b.exit_code == 0);

  const std::string cmp1 = testutil::slurp(dir1 / "comparison.json");
  REQUIRE_FALSE(cmp1.empty());
  CHECK(cmp1 == testutil::slurp(dir2 / "comparison.json"));
  CHECK(testutil::slurp(dir1 / "metrics.csv") == testutil::slurp(dir2 / "metrics.csv"));

  json j = read_json_file((dir1 / "comparison.json").string());
  REQUIRE(j.at("models").size() == 2);
  CHECK(j.at("models")[0].at("model") == "glm");
  CHECK(j.at("models")[1].at("model") == "ri");
  CHECK(j.at("models")[0].contains("evaluation"));

  const std::string metrics_text = testutil::slurp(dir1 / "metrics.csv");
  CHECK(metrics_text.rfind("model,threshold,accuracy,precision,recall,f1,auc\n", 0) == 0);
  CHECK(fs::exists(dir1 / "roc_glm.csv"));
  CHECK(fs::exists(dir1 / "roc_ri.csv"));
}

TEST_CASE("usage errors exit with code 1", "[cli]") {
  auto dir = testutil::scratch_dir("cli_usage");

  CliResult bad_fraction = run_cli(
      "compare" + data_args() + " --train-fraction 1.0 --out-dir " + dir.string(), dir);
  CHECK(bad_fraction.exit_code == 1);
  CHECK(bad_fraction.err.find("DegenerateSplit") != std::string::npos);

  CliResult bad_term = run_cli(
      "fit" + data_args() + " --terms speed_limit --out-dir " + dir.string(), dir);
  CHECK(bad_term.exit_code == 1);
  CHECK(bad_term.err.find("UnknownTerm") != std::string::npos);

  CliResult bad_flag = run_cli("fit --no-such-flag", dir);
  CHECK(bad_flag.exit_code == 1);

  CliResult no_command = run_cli("", dir);
  CHECK(no_command.exit_code == 1);
}

TEST_CASE("data errors exit with code 2 and name the offending file", "[cli]") {
  auto dir = testutil::scratch_dir("cli_data_err");
  const fs::path missing = dir / "no_such_roads.csv";

  CliResult r = run_cli("fit --crash-csv " + (data_dir() / "crashes.csv").string() +
                            " --road-csv " + missing.string() + " --out-dir " + dir.string(),
                        dir);
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("no_such_roads.csv") != std::string::npos);
}

TEST_CASE("separated data exits with the non-convergence code", "[cli]") {
  auto dir = testutil::scratch_dir("cli_sep");
  {
    std::ofstream roads(dir / "roads.csv");
    roads << "road_id,aadt,access_density,heavy_vehicle_ratio\nR1,5000,1,0.1\nR2,7000,1,0.1\n";
    std::ofstream crashes(dir / "crashes.csv");
    crashes << "crash_id,road_id,severity,lighting_night,pavement_adverse,geometry_curve,"
               "weather_adverse,driver_no_university,driver_under_30,driver_male\n";
    for (int i = 0; i < 40; ++i) {
      const int sev = i % 2;
      crashes << "C" << i << ',' << (i % 4 < 2 ? "R1" : "R2") << ',' << sev << ',' << sev
              << ",0,0,0,1,0,1\n";  // lighting_night == severity: perfectly separated
    }
  }
  CliResult r = run_cli("fit --crash-csv " + (dir / "crashes.csv").string() + " --road-csv " +
                            (dir / "roads.csv").string() + " --model glm --terms light" +
                            " --out-dir " + dir.string(),
                        dir);
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("SeparationDetected") != std::string::npos);
}

TEST_CASE("simulate consumes a fit artifact and writes per-road summaries", "[cli]") {
  auto dir = testutil::scratch_dir("cli_sim");
  CliResult fit_run =
      run_cli("fit" + data_args() + " --model ri --terms light --out-dir " + dir.string(), dir);
  REQUIRE(fit_run.exit_code == 0);

  CliResult sim = run_cli("simulate --fit " + (dir / "fit_ri.json").string() +
                              " --runs 40 --seed 6 --out-dir " + dir.string(),
                          dir);
  REQUIRE(sim.exit_code == 0);

  const std::string roads = testutil::slurp(dir / "roads_intercepts.csv");
  CHECK(roads.rfind("road_id,mean_intercept\n", 0) == 0);
  long lines = 0;
  for (char c : roads) lines += c == '\n';
  CHECK(lines == 21);  // header + 20 roads from the small preset

  const std::string fixed = testutil::slurp(dir / "fixed_intervals.csv");
  CHECK(fixed.rfind("term,mean,lo,hi\n", 0) == 0);

  // A glm artifact is not simulatable: asking for it is a usage error.
  CliResult fit_glm_run =
      run_cli("fit" + data_args() + " --model glm --terms light --out-dir " + dir.string(), dir);
  REQUIRE(fit_glm_run.exit_code == 0);
  CliResult bad = run_cli("simulate --fit " + (dir / "fit_glm.json").string() + " --out-dir " +
                              dir.string(),
                          dir);
  CHECK(bad.exit_code == 1);
}

TEST_CASE("evaluate writes eval.json with counts and AUC", "[cli]") {
  auto dir = testutil::scratch_dir("cli_eval");
  CliResult fit_run =
      run_cli("fit" + data_args() + " --model ri --out-dir " + dir.string(), dir);
  REQUIRE(fit_run.exit_code == 0);

  CliResult ev = run_cli("evaluate --fit " + (dir / "fit_ri.json").string() + data_args() +
                             " --out-dir " + dir.string(),
                         dir);
  REQUIRE(ev.exit_code == 0);
  json j = read_json_file((dir / "eval.json").string());
  CHECK(j.at("model") == "ri");
  CHECK(j.at("n_rows").get<long>() == 600);
  const double auc_value = j.at("auc").get<double>();
  CHECK(auc_value > 0.5);
  CHECK(auc_value <= 1.0);
  CHECK(j.at("counts").at("tp").get<long>() >= 0);
  CHECK(fs::exists(dir / "roc.csv"));
}

TEST_CASE("icc answers from a variance or a stored fit", "[cli]") {
  auto dir = testutil::scratch_dir("cli_icc");

  CliResult direct = run_cli("icc --sigma0-sq 0.8375 --out-dir " + dir.string(), dir);
  REQUIRE(direct.exit_code == 0);
  json j = read_json_file((dir / "icc.json").string());
  CHECK(j.at("icc").get<double>() == Catch::Approx(0.20292).margin(5e-4));
  CHECK(j.at("sigma0_sq").get<double>() == 0.8375);

  CliResult fit_run =
      run_cli("fit" + data_args() + " --model null --out-dir " + dir.string(), dir);
  REQUIRE(fit_run.exit_code == 0);
  CliResult from_fit = run_cli("icc --fit " + (dir / "fit_null.json").string() +
                                   " --out-dir " + dir.string(),
                               dir);
  REQUIRE(from_fit.exit_code == 0);
  json j2 = read_json_file((dir / "icc.json").string());
  json fit_json = read_json_file((dir / "fit_null.json").string());
  CHECK(j2.at("icc").get<double>() ==
        Catch::Approx(fit_json.at("icc").at("value").get<double>()).epsilon(1e-12));

  CliResult neither = run_cli("icc --out-dir " + dir.string(), dir);
  CHECK(neither.exit_code == 1);
}
