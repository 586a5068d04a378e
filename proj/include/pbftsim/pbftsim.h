// Copyright 2026 The pbftsim Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


/* C interface to the simulator. Every object is an opaque handle owned by
 * the caller and released with its _free function. Functions return a
 * status code; on failure pbftsim_last_error() describes the cause until
 * the next call on the same thread. Strings returned through char** are
 * heap-allocated and released with pbftsim_string_free(). */

#ifndef PBFTSIM_PBFTSIM_H
#define PBFTSIM_PBFTSIM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PBFTSIM_API __declspec(dllexport)
#else
#define PBFTSIM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pbftsim_status {
  PBFTSIM_OK = 0,
  PBFTSIM_ERR_INVALID_ARGUMENT = 1, /* null handle, out-of-range index */
  PBFTSIM_ERR_CONFIG = 2,           /* rejected configuration or sweep spec */
  PBFTSIM_ERR_IO = 3,               /* file could not be read or written */
  PBFTSIM_ERR_FORMAT = 4,           /* malformed report or CSV text */
  PBFTSIM_ERR_EMPTY = 5,            /* nothing to emit */
  PBFTSIM_ERR_INTERNAL = 6          /* invariant violated inside the engine */
} pbftsim_status;

typedef struct pbftsim_config pbftsim_config;
typedef struct pbftsim_report pbftsim_report;
typedef struct pbftsim_sweep_spec pbftsim_sweep_spec;
typedef struct pbftsim_sweep_result pbftsim_sweep_result;
typedef struct pbftsim_load_study pbftsim_load_study;

/* Called after each finished run of a sweep; may run on a worker thread. */
typedef void (*pbftsim_progress_fn)(size_t done, size_t total, void* user);

PBFTSIM_API const char* pbftsim_version(void);
PBFTSIM_API const char* pbftsim_status_string(pbftsim_status status);
PBFTSIM_API const char* pbftsim_last_error(void);
PBFTSIM_API void pbftsim_string_free(char* s);

/* ---- scenario configuration ---- */

/* Flat key = value text; unknown keys and violated constraints fail. */
PBFTSIM_API pbftsim_status pbftsim_config_parse(const char* text, pbftsim_config** out);
PBFTSIM_API pbftsim_status pbftsim_config_load(const char* path, pbftsim_config** out);
/* Overrides one key and revalidates; the handle is unchanged on failure. */
PBFTSIM_API pbftsim_status pbftsim_config_set(pbftsim_config* config, const char* key, const char* value);
/* Applies several overrides, then validates once, so keys that constrain
 * each other can change together. All or nothing. */
PBFTSIM_API pbftsim_status pbftsim_config_set_many(pbftsim_config* config, const char* const* keys,
                                                   const char* const* values, size_t count);
PBFTSIM_API pbftsim_status pbftsim_config_to_text(const pbftsim_config* config, char** out);
PBFTSIM_API void pbftsim_config_free(pbftsim_config* config);

/* ---- single runs ---- */

/* trace_path may be NULL; otherwise every event is written there as CSV. */
PBFTSIM_API pbftsim_status pbftsim_run(const pbftsim_config* config, const char* trace_path,
                                       pbftsim_report** out);

PBFTSIM_API pbftsim_status pbftsim_report_serialize(const pbftsim_report* report, char** out);
PBFTSIM_API pbftsim_status pbftsim_report_parse(const char* text, pbftsim_report** out);
PBFTSIM_API pbftsim_status pbftsim_report_write(const pbftsim_report* report, const char* path);
PBFTSIM_API pbftsim_status pbftsim_report_read(const char* path, pbftsim_report** out);
/* 1 if both reports hold identical values, 0 otherwise (or on NULL). */
PBFTSIM_API int pbftsim_report_equal(const pbftsim_report* a, const pbftsim_report* b);
PBFTSIM_API void pbftsim_report_free(pbftsim_report* report);

PBFTSIM_API uint64_t pbftsim_report_seed(const pbftsim_report* report);
PBFTSIM_API uint64_t pbftsim_report_total_committed(const pbftsim_report* report);
PBFTSIM_API size_t pbftsim_report_minutes(const pbftsim_report* report);
PBFTSIM_API uint64_t pbftsim_report_committed_in_minute(const pbftsim_report* report, size_t minute);
PBFTSIM_API size_t pbftsim_report_nodes(const pbftsim_report* report);
PBFTSIM_API uint64_t pbftsim_report_node_retries(const pbftsim_report* report, size_t node);
PBFTSIM_API double pbftsim_report_node_load(const pbftsim_report* report, size_t node);
PBFTSIM_API uint64_t pbftsim_report_node_drops(const pbftsim_report* report, size_t node);
PBFTSIM_API uint64_t pbftsim_report_node_height(const pbftsim_report* report, size_t node);
PBFTSIM_API int pbftsim_report_node_crashed(const pbftsim_report* report, size_t node);
PBFTSIM_API double pbftsim_report_avg_retries(const pbftsim_report* report);
PBFTSIM_API double pbftsim_report_mean_load(const pbftsim_report* report);
PBFTSIM_API uint64_t pbftsim_report_view_changes(const pbftsim_report* report);
PBFTSIM_API uint64_t pbftsim_report_final_view(const pbftsim_report* report);
PBFTSIM_API uint64_t pbftsim_report_messages_sent(const pbftsim_report* report);
PBFTSIM_API uint64_t pbftsim_report_trace_hash(const pbftsim_report* report);

/* ---- presets and sweeps ---- */

PBFTSIM_API size_t pbftsim_preset_count(void);
/* NULL when index is out of range. */
PBFTSIM_API const char* pbftsim_preset_name(size_t index);

PBFTSIM_API pbftsim_status pbftsim_sweep_load_preset(const char* name, pbftsim_sweep_spec** out);
PBFTSIM_API pbftsim_status pbftsim_sweep_parse(const char* text, pbftsim_sweep_spec** out);
PBFTSIM_API pbftsim_status pbftsim_sweep_load(const char* path, pbftsim_sweep_spec** out);
PBFTSIM_API pbftsim_status pbftsim_sweep_set_seed(pbftsim_sweep_spec* spec, uint64_t seed);
/* Number of runs the spec expands to (grid points times repetitions). */
PBFTSIM_API size_t pbftsim_sweep_run_count(const pbftsim_sweep_spec* spec);
PBFTSIM_API const char* pbftsim_sweep_name(const pbftsim_sweep_spec* spec);
PBFTSIM_API void pbftsim_sweep_free(pbftsim_sweep_spec* spec);

/* jobs = 0 uses every hardware thread. trace_dir may be NULL. Results are
 * in spec order and independent of jobs. */
PBFTSIM_API pbftsim_status pbftsim_sweep_run(const pbftsim_sweep_spec* spec, size_t jobs, const char* trace_dir,
                                             pbftsim_progress_fn progress, void* user,
                                             pbftsim_sweep_result** out);
PBFTSIM_API size_t pbftsim_sweep_result_count(const pbftsim_sweep_result* result);
/* Borrowed handle, valid until the result is freed. */
PBFTSIM_API const pbftsim_report* pbftsim_sweep_result_report(const pbftsim_sweep_result* result, size_t index);
/* Copies the run's scenario id ("s0001") or axis label into out. */
PBFTSIM_API pbftsim_status pbftsim_sweep_result_run_id(const pbftsim_sweep_result* result, size_t index, char** out);
PBFTSIM_API pbftsim_status pbftsim_sweep_result_axis_value(const pbftsim_sweep_result* result, size_t index,
                                                           char** out);
/* Per-minute commits of every run (long format). */
PBFTSIM_API pbftsim_status pbftsim_sweep_result_write_csv(const pbftsim_sweep_result* result, const char* path);
/* One row per run with totals. */
PBFTSIM_API pbftsim_status pbftsim_sweep_result_write_summary(const pbftsim_sweep_result* result, const char* path);
/* Per-minute means per curve, in gnuplot index blocks. */
PBFTSIM_API pbftsim_status pbftsim_sweep_result_write_plot(const pbftsim_sweep_result* result, const char* path);
PBFTSIM_API void pbftsim_sweep_result_free(pbftsim_sweep_result* result);

/* ---- load study ---- */

typedef struct pbftsim_load_fit {
  const char* group;    /* borrowed; other axis values, "-" if none */
  size_t points;        /* distinct node counts measured */
  size_t fit_points;    /* points inside the linear region */
  int monotone;
  int fitted;
  double slope;         /* load per added node */
  double intercept;
  double saturation_nodes;
  const char* warning;  /* borrowed; empty when none */
} pbftsim_load_fit;

PBFTSIM_API pbftsim_status pbftsim_load_study_run(const pbftsim_sweep_spec* spec, size_t jobs, const char* trace_dir,
                                                  pbftsim_progress_fn progress, void* user,
                                                  pbftsim_load_study** out);
PBFTSIM_API size_t pbftsim_load_study_group_count(const pbftsim_load_study* study);
PBFTSIM_API pbftsim_status pbftsim_load_study_fit(const pbftsim_load_study* study, size_t index,
                                                  pbftsim_load_fit* out);
/* Mean load at one measured point of a curve. */
PBFTSIM_API pbftsim_status pbftsim_load_study_point(const pbftsim_load_study* study, size_t group, size_t point,
                                                    size_t* nodes, double* mean_load);
/* Borrowed handle to the underlying sweep result. */
PBFTSIM_API const pbftsim_sweep_result* pbftsim_load_study_sweep(const pbftsim_load_study* study);
PBFTSIM_API pbftsim_status pbftsim_load_study_table(const pbftsim_load_study* study, char** out);
PBFTSIM_API void pbftsim_load_study_free(pbftsim_load_study* study);

#ifdef __cplusplus
}
#endif

#endif /* PBFTSIM_PBFTSIM_H */
