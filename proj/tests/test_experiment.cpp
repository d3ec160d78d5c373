/*
 Copyright 2026 The latentid Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <filesystem>

#include <gtest/gtest.h>

#include "latentid/archive.hpp"
#include "latentid/error.hpp"
#include "latentid/experiment.hpp"

namespace latentid {
namespace {

namespace fs = std::filesystem;

const char* kToml = R"(
schema_version = 1
name = "tiny"

[system]
kind = "linear"
order = 2
inputs = 1
seed = 11

[mixing]
seed = 12

[data]
protocol = "PAS"
seed = 13
records = 400
eval_records = 200

[training]
seed = 14
steps = 60
encoder_width = 8
eval_every = 20
eval_records = 100
)";

ExperimentConfig tiny() { return parse_config(kToml, true); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("latentid_experiment_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string error_text(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(Config, TomlAndJsonAgree) {
  const auto a = tiny();
  EXPECT_EQ(a.order, 2u);
  EXPECT_EQ(a.records, 400u);
  EXPECT_EQ(a.training.steps, 60u);
  EXPECT_EQ(a.system_seed, 11u);
  const auto b = parse_config(config_to_json(a).dump(), false);
  EXPECT_EQ(config_to_json(b), config_to_json(a));
  EXPECT_EQ(config_hash(a), config_hash(b));
}

TEST(Config, ValidationNamesTheField) {
  auto c = tiny();
  c.order = 0;
  EXPECT_NE(error_text([&] { validate(c); }).find("system.order"), std::string::npos);
  c = tiny();
  c.noise_sd = -1;
  EXPECT_NE(error_text([&] { validate(c); }).find("data.noise_sd"), std::string::npos);
  c = tiny();
  c.training.batch_size = 0;
  EXPECT_NE(error_text([&] { validate(c); }).find("training.batch_size"), std::string::npos);
  c = tiny();
  c.order = 0;
  c.output_dir = scratch("invalid");
  EXPECT_THROW(run(c), Error);
  EXPECT_FALSE(fs::exists(c.output_dir));
}

TEST(Config, SeedsMustBeExplicit) {
  std::string text = kToml;
  text.replace(text.find("seed = 13"), 9, "");
  EXPECT_NE(error_text([&] { parse_config(text, true); }).find("data.seed"), std::string::npos);
}

TEST(Config, UnknownKeysAndBadTypesRejected) {
  auto j = config_to_json(tiny());
  j["system"]["ordr"] = 3;
  EXPECT_NE(error_text([&] { config_from_json(j); }).find("system.ordr"), std::string::npos);
  j = config_to_json(tiny());
  j["system"]["order"] = "two";
  EXPECT_NE(error_text([&] { config_from_json(j); }).find("system.order"), std::string::npos);
  j = config_to_json(tiny());
  j["schema_version"] = 7;
  EXPECT_NE(error_text([&] { validate(config_from_json(j)); }).find("schema_version"), std::string::npos);
  EXPECT_THROW(parse_config("[system\norder = ", true), Error);
  EXPECT_THROW(parse_config("{", false), Error);
}

TEST(Config, HashIgnoresOutputLocationOnly) {
  auto a = tiny();
  auto b = a;
  b.output_dir = "/somewhere/else";
  b.write_dataset = false;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.training.steps += 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
}

TEST(Run, PopulatesReportAndArtifacts) {
  auto c = tiny();
  c.output_dir = scratch("artifacts");
  const auto r = run(c);
  EXPECT_TRUE(r.report.param_error.has_value());
  EXPECT_GE(r.report.mcc_repr, 0.0);
  EXPECT_LE(r.report.mcc_repr, 1.0);
  for (const char* f : {"system.json", "dataset.bin", "model.bin", "trace.csv", "report.json"}) {
    EXPECT_TRUE(fs::exists(c.output_dir / f)) << f;
  }
  const auto report = nlohmann::json::parse(read_text_file(c.output_dir / "report.json"));
  EXPECT_EQ(report.at("config_hash"), config_hash(c));
  EXPECT_EQ(report.at("seeds").at("training"), 14);
  EXPECT_FALSE(report.at("evaluation").at("param_error").is_null());
}

TEST(Run, SameSeedsGiveByteIdenticalReports) {
  auto c = tiny();
  c.protocol = Protocol::Active;
  c.episodes = 100;
  c.output_dir = scratch("twice_a");
  run(c);
  auto d = c;
  d.output_dir = scratch("twice_b");
  run(d, 2);
  EXPECT_EQ(read_text_file(c.output_dir / "report.json"), read_text_file(d.output_dir / "report.json"));
  EXPECT_EQ(read_text_file(c.output_dir / "model.bin"), read_text_file(d.output_dir / "model.bin"));
  EXPECT_EQ(read_text_file(c.output_dir / "dataset.bin"), read_text_file(d.output_dir / "dataset.bin"));
}

TEST(Tables, PlanShapes) {
  EXPECT_EQ(table_plan(2, TableScale::Desk).size(), 8u);
  EXPECT_EQ(table_plan(3, TableScale::Desk).size(), 2u);
  EXPECT_EQ(table_plan(4, TableScale::Desk).size(), 8u);
  EXPECT_EQ(table_plan(5, TableScale::Full).size(), 8u);
  EXPECT_EQ(table_plan(6, TableScale::Full).size(), 8u);
  EXPECT_THROW(table_plan(7, TableScale::Desk), Error);
  for (const auto& row : table_plan(2, TableScale::Desk)) EXPECT_EQ(row.system_seeds.size(), 3u);
  for (const auto& row : table_plan(4, TableScale::Desk)) {
    EXPECT_EQ(row.system_seeds.size(), 1u);
    EXPECT_EQ(row.base.order, 3u);
    EXPECT_EQ(row.base.inputs, 2u);
  }
  const auto t3 = table_plan(3, TableScale::Desk);
  EXPECT_EQ(t3[0].base.model, ModelKind::Integrator);
  EXPECT_EQ(t3[1].base.model, ModelKind::Canonical);
  EXPECT_EQ(t3[0].base.training.steps, t3[1].base.training.steps);
  const auto full = table_plan(2, TableScale::Full);
  const auto desk = table_plan(2, TableScale::Desk);
  EXPECT_EQ(full[0].base.records, 2 * desk[0].base.records);
}

nlohmann::json fake_report(const std::string& label, double sigma, const std::string& protocol) {
  return {{"config_hash", "00000000000000aa"},
          {"seeds", {{"system", 4404}}},
          {"config",
           {{"name", label},
            {"system", {{"kind", "linear"}, {"order", 3}, {"inputs", 2}}},
            {"data", {{"protocol", protocol}, {"noise_sd", sigma}}},
            {"training", {{"model", "canonical"}}}}},
          {"evaluation", {{"mcc_repr", 0.5}, {"mcc_model", 0.25}, {"blockwise_mcc", 0.75}, {"param_error", 0.125}}}};
}

TEST(PlotData, GoldenSchema) {
  const std::string golden = read_text_file(fs::path(LATENTID_TEST_DATA_DIR) / "plot_data_golden.csv");
  EXPECT_EQ(emit_plot_data({fake_report("sigma0.02_PAS", 0.02, "PAS")}), golden);
}

TEST(PlotData, OneRowPerReport) {
  std::vector<nlohmann::json> reports;
  for (double s : {0.0, 0.02, 0.2, 1.0}) {
    for (const char* p : {"PAS", "ACT"}) reports.push_back(fake_report("row", s, p));
  }
  const std::string csv = emit_plot_data(reports);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
  EXPECT_THROW(emit_plot_data({}), Error);
  EXPECT_THROW(emit_plot_data({nlohmann::json{{"config", 1}}}), Error);
}

TEST(PlotData, CollectsReportsFromRunDirectories) {
  auto c = tiny();
  c.write_dataset = false;
  const fs::path root = scratch("collect");
  c.output_dir = root / "a";
  run(c);
  c.output_dir = root / "b";
  run(c);
  const auto reports = collect_reports(root);
  ASSERT_EQ(reports.size(), 2u);
  const std::string csv = emit_plot_data(reports);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_FALSE(fs::exists(root / "a" / "dataset.bin"));
}

}  // namespace
}  // namespace latentid
