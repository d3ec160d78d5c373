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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentid/eval.hpp"

namespace latentid {

inline constexpr int kConfigSchemaVersion = 1;

enum class SystemKind { Linear, Affine };
enum class ModelKind { Canonical, Integrator };

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string name = "run";

  SystemKind system_kind = SystemKind::Linear;
  std::size_t order = 2;
  std::size_t inputs = 1;
  std::uint64_t system_seed = 0;
  std::size_t system_attempts = 16;
  AffineSamplingOptions affine;

  std::size_t observed_dim = 0;  // 0 means nd
  std::uint64_t mixing_seed = 0;
  MixingOptions mixing;

  Protocol protocol = Protocol::Passive;
  double noise_sd = 0.0;
  std::uint64_t data_seed = 0;
  std::size_t records = 50000;   // passive
  std::size_t episodes = 12500;  // active
  std::size_t t_max = 5;
  std::size_t eval_records = 10000;  // held-out transitions (episodes = eval_records / (t_max - 1))
  CollectionOptions collection;

  ModelKind model = ModelKind::Canonical;
  std::uint64_t training_seed = 0;
  TrainingConfig training;

  std::filesystem::path output_dir;  // empty: nothing written
  bool write_dataset = true;
};

std::string system_kind_name(SystemKind kind);
std::string model_kind_name(ModelKind kind);

// Field-by-field validation; the message names the offending field.
void validate(const ExperimentConfig& config);

nlohmann::json config_to_json(const ExperimentConfig& config);
// Missing keys keep their defaults, except seeds, which must be given.
ExperimentConfig config_from_json(const nlohmann::json& j);
// Accepts TOML (".toml") or JSON (anything else).
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, bool toml);

// FNV-1a of the canonical JSON form, excluding the output directory.
std::string config_hash(const ExperimentConfig& config);

struct RunResult {
  EvalReport report;
  CanonicalSystem system;
  TrainedModel model;
  std::string config_hash;
};

// Samples the system and mixing, collects training and held-out data, trains,
// evaluates, and writes system.json, dataset.bin, model.bin, trace.csv and
// report.json under output_dir when it is set.
RunResult run(const ExperimentConfig& config, std::size_t workers = 1);

nlohmann::json run_report_json(const ExperimentConfig& config, const RunResult& result);

// Smoke shrinks every run to a few hundred records and steps; it exercises
// the table plumbing and is not expected to meet any threshold.
enum class TableScale { Desk, Full, Smoke };
TableScale table_scale_from_name(const std::string& name);
std::string table_scale_name(TableScale scale);

// One configuration of a table; `runs` holds one entry per system seed.
struct TableRow {
  std::string label;
  ExperimentConfig base;
  std::vector<std::uint64_t> system_seeds;
  std::vector<EvalReport> runs;
  std::vector<std::string> hashes;

  double mean_mcc_repr() const;
  double mean_mcc_model() const;
  double mean_blockwise_mcc() const;
  std::optional<double> mean_param_error() const;
};

struct PublishedValue {
  std::optional<double> mcc;
  std::optional<double> second;  // error (tables 2, 4) or MCC(M) (tables 5, 6)
};

struct TableResult {
  int id = 0;
  TableScale scale = TableScale::Desk;
  std::vector<TableRow> rows;
  std::vector<PublishedValue> published;
  std::vector<std::string> checks;  // per-row pass/fail reasoning
  std::vector<bool> passed;

  bool all_passed() const;
  std::string csv() const;
};

// The run matrix behind a table, without executing it.
std::vector<TableRow> table_plan(int id, TableScale scale);
TableResult reproduce_table(int id, TableScale scale, const std::filesystem::path& out_dir, std::size_t workers = 1);
// Applies the acceptance thresholds to finished rows.
void judge_table(TableResult& table);

// One CSV row per report: label, system, model, n, d, nd, protocol, sigma,
// system_seed, the three MCCs, param_error and config_hash.
std::string emit_plot_data(const std::vector<nlohmann::json>& reports);
std::vector<nlohmann::json> collect_reports(const std::filesystem::path& dir);

// LATENTID_WORKERS, defaulting to 1.
std::size_t workers_from_env();

}  // namespace latentid
