#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "qsc/harness.hpp"

namespace qsc::harness {
namespace {

std::string validation_field(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.reason(), ConfigError::Reason::Validation);
    return e.field();
  }
  return "<no error>";
}

json minimal() { return {{"master_seed", 42}, {"n_trials", 1000}}; }

TEST(LoadConfig, MinimalConfigFillsDefaults) {
  const auto cfg = parse_config(minimal());
  const auto& e = cfg.experiment;
  EXPECT_EQ(e.master_seed, 42u);
  EXPECT_EQ(e.n_trials, 1000u);
  EXPECT_EQ(e.observer.t_p, 0.001);
  EXPECT_EQ(e.collapse.t_c_mean, 180.0);
  EXPECT_EQ(e.collapse.model, CollapseModel::JumpExponential);
  EXPECT_EQ(e.collapse.epsilon, 1e-3);
  EXPECT_DOUBLE_EQ(e.collapse.step(), 180.0 / 1e4);
  EXPECT_EQ(e.rule.batch_n, 5u);
  EXPECT_EQ(e.scenario.tag(), PerceptionScenario::Tag::PostCollapseOnly);
  EXPECT_FALSE(cfg.sweep);
}

TEST(LoadConfig, ErrorsNameTheFieldPath) {
  auto doc = minimal();
  doc["collapse"] = {{"t_c_mean", -1}};
  EXPECT_EQ(validation_field(doc), "collapse.t_c_mean");

  doc = minimal();
  doc["observer"] = {{"t_p", "fast"}};
  EXPECT_EQ(validation_field(doc), "observer.t_p");

  doc = minimal();
  doc["observer"] = {{"latency", 0.1}};
  EXPECT_EQ(validation_field(doc), "observer.latency");

  doc = minimal();
  doc["colour"] = "blue";
  EXPECT_EQ(validation_field(doc), "colour");

  doc = minimal();
  doc["collapse"] = {{"epsilon", 0.6}};
  EXPECT_EQ(validation_field(doc), "collapse.epsilon");

  doc = minimal();
  doc["scenario"] = {{"tag", "random_percept"}};
  EXPECT_EQ(validation_field(doc), "scenario.r");

  doc = minimal();
  doc["scenario"] = {{"tag", "fixed_c1"}, {"r", 0.5}};
  EXPECT_EQ(validation_field(doc), "scenario.r");

  doc = minimal();
  doc["rule"] = {{"kind", "majority"}};
  EXPECT_EQ(validation_field(doc), "rule.kind");

  doc = minimal();
  doc["rule"] = {{"batch_n", 0}};
  EXPECT_EQ(validation_field(doc), "rule.batch_n");

  doc = minimal();
  doc["schema_version"] = 2;
  EXPECT_EQ(validation_field(doc), "schema_version");

  doc = minimal();
  doc.erase("n_trials");
  EXPECT_EQ(validation_field(doc), "n_trials");

  doc = minimal();
  doc["master_seed"] = -5;
  EXPECT_EQ(validation_field(doc), "master_seed");
}

TEST(LoadConfig, EnergyDeterminesCollapseTime) {
  auto doc = minimal();
  doc["collapse"] = {{"energy", 4.0}, {"kappa", 2.0}};
  EXPECT_DOUBLE_EQ(parse_config(doc).experiment.collapse.t_c_mean, 0.5);
  doc["collapse"]["t_c_mean"] = 0.7;
  EXPECT_EQ(validation_field(doc), "collapse.t_c_mean");
}

TEST(LoadConfig, FileErrorsAreDistinct) {
  try {
    load_config("/nonexistent/qsc.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.reason(), ConfigError::Reason::MissingFile);
    EXPECT_STREQ(e.kind(), "config_missing_file");
  }
  const auto path = std::filesystem::temp_directory_path() / "qsc_harness_bad.json";
  std::ofstream(path) << "{ \"master_seed\": 1, ";
  try {
    load_config(path.string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.reason(), ConfigError::Reason::Parse);
  }
  std::filesystem::remove(path);
}

TEST(Sweep, ExpandsSortedPoints) {
  auto doc = minimal();
  doc["sweep"] = {{"param", "collapse.t_c_mean"}, {"values", {180, 0.001, 0.01, 0.1, 1, 10}}};
  const auto cfg = parse_config(doc);
  const auto points = expand_sweep(cfg);
  ASSERT_EQ(points.size(), 6u);
  const std::vector<double> expected{0.001, 0.01, 0.1, 1, 10, 180};
  for (std::size_t i = 0; i < points.size(); ++i) {
    EXPECT_EQ(points[i].experiment.collapse.t_c_mean, expected[i]);
    EXPECT_EQ(points[i].experiment.master_seed, 42u);
  }
}

TEST(Sweep, ValidationErrors) {
  auto doc = minimal();
  doc["sweep"] = {{"param", "collapse.t_c_mean"}, {"values", json::array()}};
  EXPECT_EQ(validation_field(doc), "sweep.values");
  doc["sweep"] = {{"param", "collapse.nope"}, {"values", {1}}};
  EXPECT_EQ(validation_field(doc), "sweep.param");
  doc["sweep"] = {{"param", "rule.batch_n"}, {"values", {1, 2.5}}};
  EXPECT_EQ(validation_field(doc), "sweep.values[1]");
  doc["sweep"] = {{"param", "collapse.t_c_mean"}, {"values", {1, -3}}};
  EXPECT_EQ(validation_field(doc), "sweep.values[1]");
}

TEST(Csv, ColumnOrderIsFixed) {
  const std::string expected =
      "sweep_param,sweep_value,n_trials,acc_definite,acc_definite_lo,acc_definite_hi,"
      "acc_superposition,acc_superposition_lo,acc_superposition_hi,acc_overall,acc_overall_lo,"
      "acc_overall_hi,device_success,device_bound,mean_report_time_definite,"
      "mean_report_time_superposition,master_seed,resolved_params\n";
  EXPECT_EQ(csv_header(), expected);
}

TEST(Csv, RowsEchoSeedAndResolvedParameters) {
  auto doc = minimal();
  doc["device_baseline"] = true;
  doc["sweep"] = {{"param", "rule.batch_n"}, {"values", {3, 1}}};
  const auto out = sweep(parse_config(doc), 1);
  std::istringstream lines(out.csv);
  std::string line;
  std::getline(lines, line);
  int rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    EXPECT_EQ(line.rfind("rule.batch_n," + std::to_string(rows == 1 ? 1 : 3) + ",1000,", 0), 0u) << line;
    EXPECT_NE(line.find(",42,\"{"), std::string::npos) << line;
    EXPECT_NE(line.find("\"\"batch_n\"\":" + std::to_string(rows == 1 ? 1 : 3)), std::string::npos);
    EXPECT_NE(line.find("0.8535533905932737"), std::string::npos);
  }
  EXPECT_EQ(rows, 2);
}

TEST(Run, CsvIsReproducible) {
  auto doc = minimal();
  doc["device_baseline"] = true;
  const auto cfg = parse_config(doc);
  const auto a = run(cfg, 1);
  EXPECT_EQ(a.csv, run(cfg, 1).csv);
  EXPECT_EQ(a.csv, run(cfg, 4).csv);
  EXPECT_GE(a.summary.overall.estimate, 0.999);
  doc["master_seed"] = 43;
  EXPECT_NE(a.csv, run(parse_config(doc), 1).csv);
}

TEST(Calibrate, RequiresDiffusion) {
  EXPECT_THROW(calibrate(parse_config(minimal()), 1), MisuseError);
}

TEST(Calibrate, WritesGammaBackIntoDocument) {
  auto doc = minimal();
  doc["collapse"] = {{"model", "diffusion"}, {"t_c_mean", 1.0}, {"dt", 0.002}};
  doc["calibration"] = {{"tolerance", 0.1}, {"max_runs", 5000}};
  const auto cfg = parse_config(doc);
  const auto out = calibrate(cfg, 1);
  EXPECT_EQ(out.updated_source["collapse"]["gamma"].get<double>(), out.result.gamma);
  EXPECT_EQ(calibrate(cfg, 1).result.gamma, out.result.gamma);
  EXPECT_LE(out.ci_lo, out.result.achieved_mean);
  // The written-back document is a valid diffusion config.
  const auto again = parse_config(out.updated_source);
  EXPECT_EQ(*again.experiment.collapse.gamma, out.result.gamma);
}

TEST(SummaryJson, HasAccuracyFields) {
  const auto j = to_json(run(parse_config(minimal()), 1).summary);
  EXPECT_TRUE(j.contains("accuracy_overall"));
  EXPECT_EQ(j["accuracy_overall"]["ci95"].size(), 2u);
  EXPECT_FALSE(j.contains("device"));
}

}  // namespace
}  // namespace qsc::harness
