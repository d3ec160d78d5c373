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

// Command-line front end. Talks to the library through the C API only.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "latentid/latentid.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitValidation = 2;
constexpr int kExitAssert = 3;

int report(latentid_status status) {
  std::fprintf(stderr, "error (%s): %s\n", latentid_status_name(status), latentid_last_error());
  return status == LATENTID_VALIDATION || status == LATENTID_FORMAT ? kExitValidation : kExitFailure;
}

std::size_t resolve_workers(std::size_t flag) {
  if (flag > 0) return flag;
  std::size_t env = 1;
  if (latentid_workers_from_env(&env) != LATENTID_OK) {
    std::fprintf(stderr, "warning: %s; using 1 worker\n", latentid_last_error());
    return 1;
  }
  return env;
}

int cmd_validate(const std::string& path) {
  latentid_config* cfg = nullptr;
  if (latentid_status s = latentid_config_load(path.c_str(), &cfg); s != LATENTID_OK) return report(s);
  const char* hash = nullptr;
  latentid_config_hash(cfg, &hash);
  std::printf("valid: %s (config hash %s)\n", path.c_str(), hash);
  latentid_config_free(cfg);
  return kExitOk;
}

int cmd_run(const std::string& path, const std::string& out, std::size_t workers) {
  latentid_config* cfg = nullptr;
  if (latentid_status s = latentid_config_load(path.c_str(), &cfg); s != LATENTID_OK) return report(s);
  if (!out.empty()) latentid_config_set_output_dir(cfg, out.c_str());
  latentid_run* run = nullptr;
  latentid_status s = latentid_run_experiment(cfg, resolve_workers(workers), &run);
  latentid_config_free(cfg);
  if (s != LATENTID_OK) return report(s);
  const char* json = nullptr;
  latentid_run_report_json(run, &json);
  std::printf("%s\n", json);
  latentid_run_free(run);
  return kExitOk;
}

int cmd_table(int id, const std::string& scale, const std::string& out, std::size_t workers, bool assert_pass) {
  latentid_table* table = nullptr;
  if (latentid_status s = latentid_table_reproduce(id, scale.c_str(), out.c_str(), resolve_workers(workers), &table);
      s != LATENTID_OK) {
    return report(s);
  }
  const char* csv = nullptr;
  latentid_table_csv(table, &csv);
  std::fputs(csv, stdout);
  int all = 0;
  latentid_table_all_passed(table, &all);
  latentid_table_free(table);
  if (assert_pass && !all) {
    std::fprintf(stderr, "table %d: at least one row misses its acceptance threshold\n", id);
    return kExitAssert;
  }
  return kExitOk;
}

int cmd_plotdata(const std::string& in, const std::string& out) {
  std::size_t rows = 0;
  if (latentid_status s = latentid_plot_data(in.c_str(), out.c_str(), &rows); s != LATENTID_OK) return report(s);
  std::printf("wrote %zu rows to %s\n", rows, out.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latentid: identifiable latent dynamics workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(latentid_version()));

  std::string config_path, out_dir, scale = "desk", in_dir, out_csv;
  int table_id = 2;
  std::size_t workers = 0;
  bool assert_pass = false;

  auto* run = app.add_subcommand("run", "Run one experiment from a TOML or JSON config");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--workers", workers, "Worker threads (default: LATENTID_WORKERS or 1)");

  auto* table = app.add_subcommand("table", "Reproduce one of tables 2-6");
  table->add_option("--id", table_id, "Table id")->required()->check(CLI::Range(2, 6));
  table->add_option("--scale", scale, "desk, full or smoke")->check(CLI::IsMember({"desk", "full", "smoke"}));
  table->add_option("--out", out_dir, "Output directory")->required();
  table->add_option("--workers", workers, "Worker threads (default: LATENTID_WORKERS or 1)");
  table->add_flag("--assert", assert_pass, "Exit with status 3 when a row misses its threshold");

  auto* plot = app.add_subcommand("plotdata", "Flatten run reports into one CSV");
  plot->add_option("--in", in_dir, "Directory searched for report.json files")->required();
  plot->add_option("--out", out_csv, "CSV path")->required();

  auto* val = app.add_subcommand("validate", "Check a config without running it");
  val->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*run) return cmd_run(config_path, out_dir, workers);
  if (*table) return cmd_table(table_id, scale, out_dir, workers, assert_pass);
  if (*plot) return cmd_plotdata(in_dir, out_csv);
  if (*val) return cmd_validate(config_path);
  return kExitFailure;
}
