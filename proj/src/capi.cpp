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


#include "pbftsim/pbftsim.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <utility>

#include "pbftsim/config.hpp"
#include "pbftsim/experiments.hpp"
#include "pbftsim/metrics.hpp"
#include "pbftsim/netsim.hpp"
#include "pbftsim/scenario.hpp"

struct pbftsim_config {
  pbftsim::ConfigDocument doc;
  pbftsim::ScenarioConfig config;
};

struct pbftsim_report {
  pbftsim::MetricsReport report;
};

struct pbftsim_sweep_spec {
  pbftsim::SweepSpec spec;
};

struct pbftsim_sweep_result {
  pbftsim::SweepResult result;
  std::vector<pbftsim_report> reports;  // borrowed views handed out by index
};

struct pbftsim_load_study {
  pbftsim::LoadStudyResult study;
  pbftsim_sweep_result sweep;
};

namespace {

thread_local std::string g_last_error;

pbftsim_status fail(pbftsim_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

pbftsim_status ok() {
  g_last_error.clear();
  return PBFTSIM_OK;
}

// Maps the exception in flight to a status code and records its message.
pbftsim_status translate() {
  try {
    throw;
  } catch (const pbftsim::ConfigError& e) {
    return fail(PBFTSIM_ERR_CONFIG, e.what());
  } catch (const pbftsim::IoError& e) {
    return fail(PBFTSIM_ERR_IO, e.what());
  } catch (const pbftsim::ReportFormatError& e) {
    return fail(PBFTSIM_ERR_FORMAT, e.what());
  } catch (const pbftsim::CsvFormatError& e) {
    return fail(PBFTSIM_ERR_FORMAT, e.what());
  } catch (const pbftsim::EmptyInput& e) {
    return fail(PBFTSIM_ERR_EMPTY, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PBFTSIM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PBFTSIM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PBFTSIM_ERR_INTERNAL, "unknown error");
  }
}

template <typename F>
pbftsim_status guarded(F&& f) {
  try {
    f();
    return ok();
  } catch (...) {
    return translate();
  }
}

pbftsim_status null_arg(const char* what) {
  return fail(PBFTSIM_ERR_INVALID_ARGUMENT, std::string(what) + " must not be null");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void fill_reports(pbftsim_sweep_result& r) {
  r.reports.clear();
  r.reports.reserve(r.result.runs.size());
  for (const auto& run : r.result.runs) r.reports.push_back({run.report});
}

pbftsim::ProgressFn make_progress(pbftsim_progress_fn fn, void* user) {
  if (!fn) return {};
  return [fn, user](std::size_t done, std::size_t total) { fn(done, total, user); };
}

}  // namespace

extern "C" {

const char* pbftsim_version(void) { return "1.0.0"; }

const char* pbftsim_status_string(pbftsim_status status) {
  switch (status) {
    case PBFTSIM_OK: return "ok";
    case PBFTSIM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PBFTSIM_ERR_CONFIG: return "configuration error";
    case PBFTSIM_ERR_IO: return "i/o error";
    case PBFTSIM_ERR_FORMAT: return "format error";
    case PBFTSIM_ERR_EMPTY: return "empty input";
    case PBFTSIM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* pbftsim_last_error(void) { return g_last_error.c_str(); }

void pbftsim_string_free(char* s) { std::free(s); }

// ---------------------------------------------------------------------------
// config

pbftsim_status pbftsim_config_parse(const char* text, pbftsim_config** out) {
  if (!text) return null_arg("text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto c = std::make_unique<pbftsim_config>();
    c->doc = pbftsim::ConfigDocument::parse(text);
    c->config = pbftsim::config_from_document(c->doc);
    *out = c.release();
  });
}

pbftsim_status pbftsim_config_load(const char* path, pbftsim_config** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const std::string text = pbftsim::read_text_file(path);
    auto c = std::make_unique<pbftsim_config>();
    try {
      c->doc = pbftsim::ConfigDocument::parse(text);
      c->config = pbftsim::config_from_document(c->doc);
    } catch (const pbftsim::ConfigError& e) {
      throw pbftsim::ConfigError(std::string(path) + ": " + e.what());
    }
    *out = c.release();
  });
}

pbftsim_status pbftsim_config_set(pbftsim_config* config, const char* key, const char* value) {
  if (!config) return null_arg("config");
  if (!key) return null_arg("key");
  if (!value) return null_arg("value");
  return guarded([&] {
    auto doc = config->doc;
    doc.set(key, value);
    auto parsed = pbftsim::config_from_document(doc);
    config->doc = std::move(doc);
    config->config = std::move(parsed);
  });
}

pbftsim_status pbftsim_config_set_many(pbftsim_config* config, const char* const* keys, const char* const* values,
                                       size_t count) {
  if (!config) return null_arg("config");
  if (count > 0 && (!keys || !values)) return null_arg("keys and values");
  for (size_t i = 0; i < count; ++i) {
    if (!keys[i] || !values[i]) return null_arg("key or value");
  }
  return guarded([&] {
    auto doc = config->doc;
    for (size_t i = 0; i < count; ++i) doc.set(keys[i], values[i]);
    auto parsed = pbftsim::config_from_document(doc);
    config->doc = std::move(doc);
    config->config = std::move(parsed);
  });
}

pbftsim_status pbftsim_config_to_text(const pbftsim_config* config, char** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = copy_string(config->config.to_text()); });
}

void pbftsim_config_free(pbftsim_config* config) { delete config; }

// ---------------------------------------------------------------------------
// runs and reports

pbftsim_status pbftsim_run(const pbftsim_config* config, const char* trace_path, pbftsim_report** out) {
  if (!config) return null_arg("config");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<pbftsim_report>();
    if (trace_path) {
      std::ofstream trace(trace_path);
      if (!trace) throw pbftsim::IoError(std::string("cannot open trace file '") + trace_path + "'");
      r->report = pbftsim::run_scenario(config->config, &trace);
      trace.flush();
      if (!trace) throw pbftsim::IoError(std::string("failed writing trace file '") + trace_path + "'");
    } else {
      r->report = pbftsim::run_scenario(config->config);
    }
    *out = r.release();
  });
}

pbftsim_status pbftsim_report_serialize(const pbftsim_report* report, char** out) {
  if (!report) return null_arg("report");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = copy_string(report->report.serialize()); });
}

pbftsim_status pbftsim_report_parse(const char* text, pbftsim_report** out) {
  if (!text) return null_arg("text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new pbftsim_report{pbftsim::MetricsReport::parse(text)}; });
}

pbftsim_status pbftsim_report_write(const pbftsim_report* report, const char* path) {
  if (!report) return null_arg("report");
  if (!path) return null_arg("path");
  return guarded([&] { pbftsim::write_text_file(path, report->report.serialize()); });
}

pbftsim_status pbftsim_report_read(const char* path, pbftsim_report** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new pbftsim_report{pbftsim::MetricsReport::parse(pbftsim::read_text_file(path))}; });
}

int pbftsim_report_equal(const pbftsim_report* a, const pbftsim_report* b) {
  return a && b && a->report == b->report ? 1 : 0;
}

void pbftsim_report_free(pbftsim_report* report) { delete report; }

#define PBFTSIM_SCALAR(name, type, expr) \
  type pbftsim_report_##name(const pbftsim_report* report) { return report ? static_cast<type>(report->report.expr) : type{}; }

PBFTSIM_SCALAR(seed, uint64_t, seed)
PBFTSIM_SCALAR(total_committed, uint64_t, total_committed)
PBFTSIM_SCALAR(minutes, size_t, committed_per_minute.size())
PBFTSIM_SCALAR(nodes, size_t, retries_per_node.size())
PBFTSIM_SCALAR(avg_retries, double, avg_retries)
PBFTSIM_SCALAR(mean_load, double, mean_load)
PBFTSIM_SCALAR(view_changes, uint64_t, view_changes)
PBFTSIM_SCALAR(final_view, uint64_t, final_view)
PBFTSIM_SCALAR(messages_sent, uint64_t, messages_sent)
PBFTSIM_SCALAR(trace_hash, uint64_t, trace_hash)

#undef PBFTSIM_SCALAR

#define PBFTSIM_INDEXED(name, type, field)                                          \
  type pbftsim_report_##name(const pbftsim_report* report, size_t i) {              \
    if (!report || i >= report->report.field.size()) return type{};                   \
    return static_cast<type>(report->report.field[i]);                                \
  }

PBFTSIM_INDEXED(committed_in_minute, uint64_t, committed_per_minute)
PBFTSIM_INDEXED(node_retries, uint64_t, retries_per_node)
PBFTSIM_INDEXED(node_load, double, load_per_node)
PBFTSIM_INDEXED(node_drops, uint64_t, drops_per_node)
PBFTSIM_INDEXED(node_height, uint64_t, ledger_heights)
PBFTSIM_INDEXED(node_crashed, int, crashed)

#undef PBFTSIM_INDEXED

// ---------------------------------------------------------------------------
// presets and sweeps

size_t pbftsim_preset_count(void) { return pbftsim::preset_names().size(); }

const char* pbftsim_preset_name(size_t index) {
  const auto& names = pbftsim::preset_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

pbftsim_status pbftsim_sweep_load_preset(const char* name, pbftsim_sweep_spec** out) {
  if (!name) return null_arg("name");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new pbftsim_sweep_spec{pbftsim::load_preset(name)}; });
}

pbftsim_status pbftsim_sweep_parse(const char* text, pbftsim_sweep_spec** out) {
  if (!text) return null_arg("text");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new pbftsim_sweep_spec{pbftsim::parse_sweep(text)}; });
}

pbftsim_status pbftsim_sweep_load(const char* path, pbftsim_sweep_spec** out) {
  if (!path) return null_arg("path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    const std::string text = pbftsim::read_text_file(path);
    try {
      *out = new pbftsim_sweep_spec{pbftsim::parse_sweep(text)};
    } catch (const pbftsim::ConfigError& e) {
      throw pbftsim::ConfigError(std::string(path) + ": " + e.what());
    }
  });
}

pbftsim_status pbftsim_sweep_set_seed(pbftsim_sweep_spec* spec, uint64_t seed) {
  if (!spec) return null_arg("spec");
  return guarded([&] { pbftsim::set_master_seed(spec->spec, seed); });
}

size_t pbftsim_sweep_run_count(const pbftsim_sweep_spec* spec) {
  return spec ? spec->spec.points() * spec->spec.repetitions : 0;
}

const char* pbftsim_sweep_name(const pbftsim_sweep_spec* spec) { return spec ? spec->spec.name.c_str() : nullptr; }

void pbftsim_sweep_free(pbftsim_sweep_spec* spec) { delete spec; }

pbftsim_status pbftsim_sweep_run(const pbftsim_sweep_spec* spec, size_t jobs, const char* trace_dir,
                                 pbftsim_progress_fn progress, void* user, pbftsim_sweep_result** out) {
  if (!spec) return null_arg("spec");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<pbftsim_sweep_result>();
    r->result = pbftsim::run_sweep(spec->spec, jobs, make_progress(progress, user), trace_dir ? trace_dir : "");
    fill_reports(*r);
    *out = r.release();
  });
}

size_t pbftsim_sweep_result_count(const pbftsim_sweep_result* result) {
  return result ? result->result.runs.size() : 0;
}

const pbftsim_report* pbftsim_sweep_result_report(const pbftsim_sweep_result* result, size_t index) {
  if (!result || index >= result->reports.size()) return nullptr;
  return &result->reports[index];
}

pbftsim_status pbftsim_sweep_result_run_id(const pbftsim_sweep_result* result, size_t index, char** out) {
  if (!result) return null_arg("result");
  if (!out) return null_arg("out");
  *out = nullptr;
  if (index >= result->result.runs.size()) return fail(PBFTSIM_ERR_INVALID_ARGUMENT, "run index out of range");
  return guarded([&] { *out = copy_string(pbftsim::scenario_id(result->result.runs[index])); });
}

pbftsim_status pbftsim_sweep_result_axis_value(const pbftsim_sweep_result* result, size_t index, char** out) {
  if (!result) return null_arg("result");
  if (!out) return null_arg("out");
  *out = nullptr;
  if (index >= result->result.runs.size()) return fail(PBFTSIM_ERR_INVALID_ARGUMENT, "run index out of range");
  return guarded([&] { *out = copy_string(result->result.runs[index].axis_value); });
}

pbftsim_status pbftsim_sweep_result_write_csv(const pbftsim_sweep_result* result, const char* path) {
  if (!result) return null_arg("result");
  if (!path) return null_arg("path");
  return guarded([&] { pbftsim::emit_csv(result->result, path); });
}

pbftsim_status pbftsim_sweep_result_write_summary(const pbftsim_sweep_result* result, const char* path) {
  if (!result) return null_arg("result");
  if (!path) return null_arg("path");
  return guarded([&] {
    if (result->result.runs.empty()) throw pbftsim::EmptyInput("no runs to summarize");
    pbftsim::write_text_file(path, pbftsim::render_summary_csv(result->result));
  });
}

pbftsim_status pbftsim_sweep_result_write_plot(const pbftsim_sweep_result* result, const char* path) {
  if (!result) return null_arg("result");
  if (!path) return null_arg("path");
  return guarded([&] { pbftsim::emit_plot_data(result->result, path); });
}

void pbftsim_sweep_result_free(pbftsim_sweep_result* result) { delete result; }

// ---------------------------------------------------------------------------
// load study

pbftsim_status pbftsim_load_study_run(const pbftsim_sweep_spec* spec, size_t jobs, const char* trace_dir,
                                      pbftsim_progress_fn progress, void* user, pbftsim_load_study** out) {
  if (!spec) return null_arg("spec");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto s = std::make_unique<pbftsim_load_study>();
    s->study = pbftsim::run_load_study(spec->spec, jobs, make_progress(progress, user), trace_dir ? trace_dir : "");
    s->sweep.result = s->study.sweep;
    fill_reports(s->sweep);
    *out = s.release();
  });
}

size_t pbftsim_load_study_group_count(const pbftsim_load_study* study) {
  return study ? study->study.fits.size() : 0;
}

pbftsim_status pbftsim_load_study_fit(const pbftsim_load_study* study, size_t index, pbftsim_load_fit* out) {
  if (!study) return null_arg("study");
  if (!out) return null_arg("out");
  if (index >= study->study.fits.size()) return fail(PBFTSIM_ERR_INVALID_ARGUMENT, "group index out of range");
  const auto& f = study->study.fits[index];
  out->group = f.group.c_str();
  out->points = f.points.size();
  out->fit_points = f.fit_points;
  out->monotone = f.monotone ? 1 : 0;
  out->fitted = f.fitted ? 1 : 0;
  out->slope = f.slope;
  out->intercept = f.intercept;
  out->saturation_nodes = f.saturation_nodes;
  out->warning = f.warning.c_str();
  return ok();
}

pbftsim_status pbftsim_load_study_point(const pbftsim_load_study* study, size_t group, size_t point, size_t* nodes,
                                        double* mean_load) {
  if (!study) return null_arg("study");
  if (group >= study->study.fits.size() || point >= study->study.fits[group].points.size()) {
    return fail(PBFTSIM_ERR_INVALID_ARGUMENT, "load point index out of range");
  }
  const auto& p = study->study.fits[group].points[point];
  if (nodes) *nodes = p.nodes;
  if (mean_load) *mean_load = p.mean_load;
  return ok();
}

const pbftsim_sweep_result* pbftsim_load_study_sweep(const pbftsim_load_study* study) {
  return study ? &study->sweep : nullptr;
}

pbftsim_status pbftsim_load_study_table(const pbftsim_load_study* study, char** out) {
  if (!study) return null_arg("study");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = copy_string(pbftsim::render_load_table(study->study)); });
}

void pbftsim_load_study_free(pbftsim_load_study* study) { delete study; }

}  // extern "C"
