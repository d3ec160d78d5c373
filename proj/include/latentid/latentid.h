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

#ifndef LATENTID_LATENTID_H_
#define LATENTID_LATENTID_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LATENTID_API __declspec(dllexport)
#else
#define LATENTID_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum latentid_status {
  LATENTID_OK = 0,
  LATENTID_INVALID_ARGUMENT = 1,
  LATENTID_SHAPE_MISMATCH = 2,
  LATENTID_NON_FINITE = 3,
  LATENTID_VALIDATION = 4,
  LATENTID_IO = 5,
  LATENTID_FORMAT = 6,
  LATENTID_ASSUMPTION = 7,
  LATENTID_DIVERGENCE = 8,
  LATENTID_STATE = 9,
  LATENTID_INTERNAL = 10
} latentid_status;

/* Opaque handles. Every handle is released with its matching *_free call;
 * passing NULL to a *_free call is a no-op. */
typedef struct latentid_config latentid_config;
typedef struct latentid_run latentid_run;
typedef struct latentid_table latentid_table;

/* Message for the most recent failure on the calling thread ("" if none).
 * Valid until the next failing call on the same thread. */
LATENTID_API const char* latentid_last_error(void);
LATENTID_API const char* latentid_status_name(latentid_status status);
LATENTID_API const char* latentid_version(void);

/* Configuration. `is_toml` selects TOML (nonzero) or JSON (zero). */
LATENTID_API latentid_status latentid_config_load(const char* path, latentid_config** out);
LATENTID_API latentid_status latentid_config_parse(const char* text, int is_toml, latentid_config** out);
LATENTID_API latentid_status latentid_config_set_output_dir(latentid_config* config, const char* dir);
/* The returned strings are owned by the handle. */
LATENTID_API latentid_status latentid_config_hash(const latentid_config* config, const char** out);
LATENTID_API latentid_status latentid_config_json(const latentid_config* config, const char** out);
LATENTID_API void latentid_config_free(latentid_config* config);

/* Single experiment: sample, collect, train, evaluate, write artifacts. */
LATENTID_API latentid_status latentid_run_experiment(const latentid_config* config, size_t workers,
                                                     latentid_run** out);
/* name: "mcc_repr", "mcc_model", "blockwise_mcc", "param_error", "min_r_squared",
 * "off_block_mass", "diagonal_spread", "offset_norm", "diagonal_norm".
 * param_error yields LATENTID_STATE when the run has none. */
LATENTID_API latentid_status latentid_run_metric(const latentid_run* run, const char* name, double* out);
LATENTID_API latentid_status latentid_run_report_json(const latentid_run* run, const char** out);
LATENTID_API void latentid_run_free(latentid_run* run);

/* Tables 2..6. scale: "desk", "full" or "smoke". out_dir may be NULL or "" to skip writing. */
LATENTID_API latentid_status latentid_table_reproduce(int id, const char* scale, const char* out_dir, size_t workers,
                                                      latentid_table** out);
LATENTID_API latentid_status latentid_table_csv(const latentid_table* table, const char** out);
LATENTID_API latentid_status latentid_table_row_count(const latentid_table* table, size_t* out);
LATENTID_API latentid_status latentid_table_row(const latentid_table* table, size_t index, const char** label,
                                                const char** criterion, int* passed);
LATENTID_API latentid_status latentid_table_all_passed(const latentid_table* table, int* out);
LATENTID_API void latentid_table_free(latentid_table* table);

/* Scans in_dir recursively for report.json files and writes one CSV row per report. */
LATENTID_API latentid_status latentid_plot_data(const char* in_dir, const char* out_csv, size_t* rows_written);

/* LATENTID_WORKERS, defaulting to 1. */
LATENTID_API latentid_status latentid_workers_from_env(size_t* out);

#ifdef __cplusplus
}
#endif

#endif /* LATENTID_LATENTID_H_ */
