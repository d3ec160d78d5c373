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

#include "latentid/latentid.h"

#include <string>

#include "latentid/archive.hpp"
#include "latentid/experiment.hpp"

struct latentid_config {
  latentid::ExperimentConfig config;
  std::string hash;
  std::string json;
};

struct latentid_run {
  latentid::RunResult result;
  std::string report_json;
};

struct latentid_table {
  latentid::TableResult table;
  std::string csv;
};

namespace {

thread_local std::string last_error;

latentid_status status_of(latentid::ErrorKind kind) {
  using latentid::ErrorKind;
  switch (kind) {
    case ErrorKind::InvalidArgument: return LATENTID_INVALID_ARGUMENT;
    case ErrorKind::ShapeMismatch: return LATENTID_SHAPE_MISMATCH;
    case ErrorKind::NonFinite: return LATENTID_NON_FINITE;
    case ErrorKind::Validation: return LATENTID_VALIDATION;
    case ErrorKind::Io: return LATENTID_IO;
    case ErrorKind::Format: return LATENTID_FORMAT;
    case ErrorKind::Assumption: return LATENTID_ASSUMPTION;
    case ErrorKind::Divergence: return LATENTID_DIVERGENCE;
    case ErrorKind::State: return LATENTID_STATE;
  }
  return LATENTID_INTERNAL;
}

latentid_status set_error(latentid_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
latentid_status guarded(F&& body) {
  try {
    body();
    return LATENTID_OK;
  } catch (const latentid::Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(LATENTID_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(LATENTID_INTERNAL, e.what());
  }
}

#define LATENTID_REQUIRE(ptr) \
  if ((ptr) == nullptr) return set_error(LATENTID_INVALID_ARGUMENT, #ptr " must not be NULL")

latentid_config* wrap_config(latentid::ExperimentConfig c) {
  auto* h = new latentid_config{std::move(c), {}, {}};
  h->hash = latentid::config_hash(h->config);
  h->json = latentid::config_to_json(h->config).dump(2);
  return h;
}

}  // namespace

extern "C" {

const char* latentid_last_error(void) { return last_error.c_str(); }

const char* latentid_status_name(latentid_status status) {
  switch (status) {
    case LATENTID_OK: return "ok";
    case LATENTID_INVALID_ARGUMENT: return "invalid_argument";
    case LATENTID_SHAPE_MISMATCH: return "shape_mismatch";
    case LATENTID_NON_FINITE: return "non_finite";
    case LATENTID_VALIDATION: return "validation";
    case LATENTID_IO: return "io";
    case LATENTID_FORMAT: return "format";
    case LATENTID_ASSUMPTION: return "assumption";
    case LATENTID_DIVERGENCE: return "divergence";
    case LATENTID_STATE: return "state";
    case LATENTID_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* latentid_version(void) { return "0.1.0"; }

latentid_status latentid_config_load(const char* path, latentid_config** out) {
  LATENTID_REQUIRE(path);
  LATENTID_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = wrap_config(latentid::load_config(path)); });
}

latentid_status latentid_config_parse(const char* text, int is_toml, latentid_config** out) {
  LATENTID_REQUIRE(text);
  LATENTID_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = wrap_config(latentid::parse_config(text, is_toml != 0)); });
}

latentid_status latentid_config_set_output_dir(latentid_config* config, const char* dir) {
  LATENTID_REQUIRE(config);
  LATENTID_REQUIRE(dir);
  return guarded([&] {
    config->config.output_dir = dir;
    config->json = latentid::config_to_json(config->config).dump(2);
  });
}

latentid_status latentid_config_hash(const latentid_config* config, const char** out) {
  LATENTID_REQUIRE(config);
  LATENTID_REQUIRE(out);
  *out = config->hash.c_str();
  return LATENTID_OK;
}

latentid_status latentid_config_json(const latentid_config* config, const char** out) {
  LATENTID_REQUIRE(config);
  LATENTID_REQUIRE(out);
  *out = config->json.c_str();
  return LATENTID_OK;
}

void latentid_config_free(latentid_config* config) { delete config; }

latentid_status latentid_run_experiment(const latentid_config* config, size_t workers, latentid_run** out) {
  LATENTID_REQUIRE(config);
  LATENTID_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto* h = new latentid_run{latentid::run(config->config, workers == 0 ? 1 : workers), {}};
    h->report_json = latentid::run_report_json(config->config, h->result).dump(2);
    *out = h;
  });
}

latentid_status latentid_run_metric(const latentid_run* run, const char* name, double* out) {
  LATENTID_REQUIRE(run);
  LATENTID_REQUIRE(name);
  LATENTID_REQUIRE(out);
  const auto& r = run->result.report;
  const auto& f = r.affine_fit;
  const std::string key = name;
  if (key == "mcc_repr") {
    *out = r.mcc_repr;
  } else if (key == "mcc_model") {
    *out = r.mcc_model;
  } else if (key == "blockwise_mcc") {
    *out = r.blockwise_mcc;
  } else if (key == "param_error") {
    if (!r.param_error) return set_error(LATENTID_STATE, "this run has no parameter error (non-linear model)");
    *out = *r.param_error;
  } else if (key == "min_r_squared") {
    *out = f.min_r_squared;
  } else if (key == "off_block_mass") {
    *out = f.off_block_mass;
  } else if (key == "diagonal_spread") {
    *out = f.diagonal_spread;
  } else if (key == "offset_norm") {
    *out = f.offset_norm;
  } else if (key == "diagonal_norm") {
    *out = f.diagonal_norm;
  } else {
    return set_error(LATENTID_INVALID_ARGUMENT, "unknown metric '" + key + "'");
  }
  return LATENTID_OK;
}

latentid_status latentid_run_report_json(const latentid_run* run, const char** out) {
  LATENTID_REQUIRE(run);
  LATENTID_REQUIRE(out);
  *out = run->report_json.c_str();
  return LATENTID_OK;
}

void latentid_run_free(latentid_run* run) { delete run; }

latentid_status latentid_table_reproduce(int id, const char* scale, const char* out_dir, size_t workers,
                                         latentid_table** out) {
  LATENTID_REQUIRE(scale);
  LATENTID_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    const auto s = latentid::table_scale_from_name(scale);
    const std::filesystem::path dir = out_dir == nullptr ? "" : out_dir;
    auto* h = new latentid_table{latentid::reproduce_table(id, s, dir, workers == 0 ? 1 : workers), {}};
    h->csv = h->table.csv();
    *out = h;
  });
}

latentid_status latentid_table_csv(const latentid_table* table, const char** out) {
  LATENTID_REQUIRE(table);
  LATENTID_REQUIRE(out);
  *out = table->csv.c_str();
  return LATENTID_OK;
}

latentid_status latentid_table_row_count(const latentid_table* table, size_t* out) {
  LATENTID_REQUIRE(table);
  LATENTID_REQUIRE(out);
  *out = table->table.rows.size();
  return LATENTID_OK;
}

latentid_status latentid_table_row(const latentid_table* table, size_t index, const char** label,
                                   const char** criterion, int* passed) {
  LATENTID_REQUIRE(table);
  if (index >= table->table.rows.size()) {
    return set_error(LATENTID_INVALID_ARGUMENT, "row index " + std::to_string(index) + " out of range");
  }
  if (label != nullptr) *label = table->table.rows[index].label.c_str();
  if (criterion != nullptr) *criterion = table->table.checks[index].c_str();
  if (passed != nullptr) *passed = table->table.passed[index] ? 1 : 0;
  return LATENTID_OK;
}

latentid_status latentid_table_all_passed(const latentid_table* table, int* out) {
  LATENTID_REQUIRE(table);
  LATENTID_REQUIRE(out);
  *out = table->table.all_passed() ? 1 : 0;
  return LATENTID_OK;
}

void latentid_table_free(latentid_table* table) { delete table; }

latentid_status latentid_plot_data(const char* in_dir, const char* out_csv, size_t* rows_written) {
  LATENTID_REQUIRE(in_dir);
  LATENTID_REQUIRE(out_csv);
  return guarded([&] {
    const auto reports = latentid::collect_reports(in_dir);
    latentid::write_text_file(out_csv, latentid::emit_plot_data(reports));
    if (rows_written != nullptr) *rows_written = reports.size();
  });
}

latentid_status latentid_workers_from_env(size_t* out) {
  LATENTID_REQUIRE(out);
  return guarded([&] { *out = latentid::workers_from_env(); });
}

}  // extern "C"
