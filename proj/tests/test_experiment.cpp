#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "distaudit/experiment.hpp"

using namespace distaudit;
using experiment::ExperimentConfig;

namespace {

ExperimentConfig small_config(const std::filesystem::path& dir) {
  ExperimentConfig cfg;
  cfg.scenario.blocks = 1 << 14;
  cfg.scenario.block_size = 32;
  cfg.scenario.seed = 11;
  cfg.scenario.error.fraction = 0.02;
  cfg.scenario.error.seed = 4;
  cfg.protocol = 1;
  cfg.subtpas = 4;
  cfg.sample_pct = 25.0;
  cfg.trials = 3;
  cfg.seed = 505;
  cfg.sobol_degree = 6;
  cfg.report_path = (dir / "report.csv").string();
  cfg.summary_path = (dir / "summary.csv").string();
  cfg.fit_path = (dir / "fit.json").string();
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run_experiment produces a consistent matrix and artifacts") {
  auto dir = std::filesystem::temp_directory_path() / "distaudit_exp_test";
  std::filesystem::create_directories(dir);
  auto cfg = small_config(dir);
  auto result = experiment::run_experiment(cfg);
  REQUIRE(result.trials.size() == 3);
  REQUIRE(result.matrix.n_subtpas == 4);

  // Matrix column totals equal the audit outcomes' per-trial totals.
  auto totals = result.matrix.column_totals();
  for (size_t t = 0; t < 3; ++t) {
    CHECK(totals[t] == result.trials[t].outcome.total_detected);
  }

  experiment::write_artifacts(cfg, result);
  auto report = slurp(cfg.report_path);
  CHECK(report.rfind("trial,subtpa,packet,", 0) == 0);

  // The analyze path reconstructs the same matrix from the report file.
  std::ifstream is(cfg.report_path);
  auto matrix = analysis::read_report_csv(is);
  REQUIRE(matrix.n_subtpas == 4);
  REQUIRE(matrix.n_trials == 3);
  for (size_t r = 0; r < 4; ++r) {
    for (size_t c = 0; c < 3; ++c) CHECK(matrix.at(r, c) == result.matrix.at(r, c));
  }

  SECTION("same config and seed reruns byte-identically") {
    auto again = experiment::run_experiment(cfg);
    auto dir2 = dir / "rerun";
    std::filesystem::create_directories(dir2);
    auto cfg2 = cfg;
    cfg2.report_path = (dir2 / "report.csv").string();
    cfg2.summary_path = (dir2 / "summary.csv").string();
    cfg2.fit_path = (dir2 / "fit.json").string();
    experiment::write_artifacts(cfg2, again);
    CHECK(slurp(cfg2.report_path) == report);
    CHECK(slurp(cfg2.summary_path) == slurp(cfg.summary_path));
    CHECK(slurp(cfg2.fit_path) == slurp(cfg.fit_path));
  }
}

TEST_CASE("experiment config validation") {
  auto dir = std::filesystem::temp_directory_path();
  auto cfg = small_config(dir);
  SECTION("trials = 0 rejected") {
    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
  }
  SECTION("protocol out of range rejected") {
    cfg.protocol = 5;
    CHECK_THROWS_AS(cfg.validate(), config_error);
  }
  SECTION("non-power-of-two blocks rejected") {
    cfg.scenario.blocks = 1000;
    CHECK_THROWS_AS(cfg.validate(), config_error);
  }
  SECTION("missing report path rejected") {
    cfg.report_path.clear();
    CHECK_THROWS_AS(cfg.validate(), config_error);
  }
}

TEST_CASE("experiment config JSON parsing") {
  nlohmann::json j = {
      {"scenario", {{"blocks", 4096}, {"block_size", 64}, {"seed", 1}, {"error", {{"fraction", 0.01}, {"pattern", "random"}, {"seed", 2}}}}},
      {"protocol", 2},
      {"subtpas", 3},
      {"sample_pct", 20.0},
      {"tdk_ones", 4},
      {"trials", 2},
      {"seed", 9},
      {"stop_policy", "threshold"},
      {"mode", "concurrent"},
      {"out", {{"report", "r.csv"}, {"summary", "s.csv"}}},
  };
  auto cfg = experiment::experiment_config_from_json(j);
  CHECK(cfg.protocol == 2);
  CHECK(cfg.subtpas == 3);
  CHECK(cfg.stop_policy == audit::StopPolicy::StopOnThreshold);
  CHECK(cfg.exec_mode == audit::ExecMode::Concurrent);
  CHECK(cfg.report_path == "r.csv");
  CHECK_NOTHROW(cfg.validate());

  j["stop_policy"] = "sometimes";
  CHECK_THROWS_AS(experiment::experiment_config_from_json(j), config_error);
}

TEST_CASE("recon demo end to end") {
  auto demo = experiment::run_recon_demo("10010101", "101101001", 3, 5, 83, 47);
  CHECK(demo.round_trip_ok);
  CHECK(demo.cycles_a.size() == 12);
  CHECK(demo.cycles_b.size() == 12);
  CHECK(demo.ratio_values == std::vector<uint64_t>{6, 18, 43, 10, 14});
}
