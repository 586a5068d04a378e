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


// Command-line front end. Uses only the C interface of libpbftsim.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pbftsim/pbftsim.h"

namespace {

namespace fs = std::filesystem;

// Raised after a failed C call; carries the library's diagnostic.
struct Failure {
  std::string message;
};

void check(pbftsim_status status, const std::string& context) {
  if (status == PBFTSIM_OK) return;
  std::string msg = context + ": " + pbftsim_status_string(status);
  const std::string detail = pbftsim_last_error();
  if (!detail.empty()) msg += ": " + detail;
  throw Failure{msg};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<pbftsim_config, Deleter<pbftsim_config, pbftsim_config_free>>;
using ReportPtr = std::unique_ptr<pbftsim_report, Deleter<pbftsim_report, pbftsim_report_free>>;
using SpecPtr = std::unique_ptr<pbftsim_sweep_spec, Deleter<pbftsim_sweep_spec, pbftsim_sweep_free>>;
using ResultPtr = std::unique_ptr<pbftsim_sweep_result, Deleter<pbftsim_sweep_result, pbftsim_sweep_result_free>>;
using StudyPtr = std::unique_ptr<pbftsim_load_study, Deleter<pbftsim_load_study, pbftsim_load_study_free>>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  pbftsim_string_free(s);
  return out;
}

void make_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{"cannot create directory '" + dir + "': " + ec.message()};
}

void progress_line(size_t done, size_t total, void* user) {
  if (*static_cast<bool*>(user)) return;
  std::fprintf(stderr, "\r[%zu/%zu] runs", done, total);
  if (done == total) std::fputc('\n', stderr);
  std::fflush(stderr);
}

struct SweepSource {
  std::string preset;
  std::string spec_file;
};

SpecPtr load_spec(const SweepSource& src, const std::string& fallback_preset) {
  pbftsim_sweep_spec* raw = nullptr;
  if (!src.spec_file.empty()) {
    check(pbftsim_sweep_load(src.spec_file.c_str(), &raw), "loading sweep spec");
  } else {
    const std::string name = src.preset.empty() ? fallback_preset : src.preset;
    if (name.empty()) throw Failure{"one of --preset or --spec is required"};
    check(pbftsim_sweep_load_preset(name.c_str(), &raw), "loading preset '" + name + "'");
  }
  return SpecPtr(raw);
}

// Writes the per-minute CSV, summary, plot data and every run report.
void write_sweep_outputs(const pbftsim_sweep_result* result, const std::string& name, const std::string& dir) {
  make_dir(dir);
  const fs::path base(dir);
  check(pbftsim_sweep_result_write_csv(result, (base / (name + ".csv")).c_str()), "writing csv");
  check(pbftsim_sweep_result_write_summary(result, (base / (name + ".summary.csv")).c_str()), "writing summary");
  check(pbftsim_sweep_result_write_plot(result, (base / (name + ".plot.dat")).c_str()), "writing plot data");
  const fs::path reports = base / "reports";
  make_dir(reports.string());
  for (size_t i = 0; i < pbftsim_sweep_result_count(result); ++i) {
    char* id = nullptr;
    check(pbftsim_sweep_result_run_id(result, i, &id), "reading run id");
    const std::string file = (reports / (take_string(id) + ".report")).string();
    check(pbftsim_report_write(pbftsim_sweep_result_report(result, i), file.c_str()), "writing report");
  }
}

// Mean commits, retries and load per axis value.
void print_sweep_table(const pbftsim_sweep_result* result) {
  struct Acc {
    double committed = 0, retries = 0, load = 0;
    size_t runs = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (size_t i = 0; i < pbftsim_sweep_result_count(result); ++i) {
    char* raw = nullptr;
    check(pbftsim_sweep_result_axis_value(result, i, &raw), "reading axis value");
    const std::string axis = take_string(raw);
    if (!acc.count(axis)) order.push_back(axis);
    const pbftsim_report* r = pbftsim_sweep_result_report(result, i);
    auto& a = acc[axis];
    a.committed += static_cast<double>(pbftsim_report_total_committed(r));
    a.retries += pbftsim_report_avg_retries(r);
    a.load += pbftsim_report_mean_load(r);
    ++a.runs;
  }
  std::printf("%-40s %5s %12s %12s %9s\n", "axis_value", "runs", "committed", "avg_retries", "load");
  for (const auto& axis : order) {
    const auto& a = acc[axis];
    const double n = static_cast<double>(a.runs);
    std::printf("%-40s %5zu %12.1f %12.2f %9.4f\n", axis.c_str(), a.runs, a.committed / n, a.retries / n,
                a.load / n);
  }
}

int cmd_run(const std::string& config_file, const std::vector<std::string>& overrides, const uint64_t* seed,
            const std::string& out, const std::string& trace) {
  pbftsim_config* raw = nullptr;
  if (config_file.empty()) {
    check(pbftsim_config_parse("", &raw), "default config");
  } else {
    check(pbftsim_config_load(config_file.c_str(), &raw), "loading config");
  }
  ConfigPtr config(raw);
  std::vector<std::string> keys;
  std::vector<std::string> values;
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw Failure{"override '" + kv + "': expected key=value"};
    keys.push_back(kv.substr(0, eq));
    values.push_back(kv.substr(eq + 1));
  }
  if (seed) {
    keys.emplace_back("seed");
    values.push_back(std::to_string(*seed));
  }
  std::vector<const char*> kp;
  std::vector<const char*> vp;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    kp.push_back(keys[i].c_str());
    vp.push_back(values[i].c_str());
  }
  check(pbftsim_config_set_many(config.get(), kp.data(), vp.data(), kp.size()), "overrides");
  pbftsim_report* rep = nullptr;
  check(pbftsim_run(config.get(), trace.empty() ? nullptr : trace.c_str(), &rep), "run");
  ReportPtr report(rep);
  if (out.empty()) {
    char* text = nullptr;
    check(pbftsim_report_serialize(report.get(), &text), "serializing report");
    std::cout << take_string(text);
  } else {
    const fs::path parent = fs::path(out).parent_path();
    if (!parent.empty()) make_dir(parent.string());
    check(pbftsim_report_write(report.get(), out.c_str()), "writing report");
    std::printf("committed=%llu avg_retries=%.2f mean_load=%.4f view_changes=%llu report=%s\n",
                static_cast<unsigned long long>(pbftsim_report_total_committed(report.get())),
                pbftsim_report_avg_retries(report.get()), pbftsim_report_mean_load(report.get()),
                static_cast<unsigned long long>(pbftsim_report_view_changes(report.get())), out.c_str());
  }
  return 0;
}

int cmd_sweep(const SweepSource& src, const uint64_t* seed, const std::string& out, const std::string& trace,
              size_t jobs, bool quiet) {
  SpecPtr spec = load_spec(src, "");
  if (seed) check(pbftsim_sweep_set_seed(spec.get(), *seed), "--seed");
  make_dir(trace);
  pbftsim_sweep_result* raw = nullptr;
  check(pbftsim_sweep_run(spec.get(), jobs, trace.empty() ? nullptr : trace.c_str(), progress_line, &quiet, &raw),
        "sweep");
  ResultPtr result(raw);
  const std::string name = pbftsim_sweep_name(spec.get());
  write_sweep_outputs(result.get(), name, out);
  print_sweep_table(result.get());
  std::printf("wrote %zu runs to %s\n", pbftsim_sweep_result_count(result.get()), out.c_str());
  return 0;
}

int cmd_load_study(const SweepSource& src, const uint64_t* seed, const std::string& out, const std::string& trace,
                   size_t jobs, bool quiet) {
  SpecPtr spec = load_spec(src, "EXP-LOAD");
  if (seed) check(pbftsim_sweep_set_seed(spec.get(), *seed), "--seed");
  make_dir(trace);
  pbftsim_load_study* raw = nullptr;
  check(pbftsim_load_study_run(spec.get(), jobs, trace.empty() ? nullptr : trace.c_str(), progress_line, &quiet,
                               &raw),
        "load study");
  StudyPtr study(raw);
  const std::string name = pbftsim_sweep_name(spec.get());
  write_sweep_outputs(pbftsim_load_study_sweep(study.get()), name, out);
  char* table = nullptr;
  check(pbftsim_load_study_table(study.get(), &table), "rendering load table");
  const std::string text = take_string(table);
  const std::string table_path = (fs::path(out) / (name + ".load.csv")).string();
  std::FILE* f = std::fopen(table_path.c_str(), "w");
  if (!f || std::fwrite(text.data(), 1, text.size(), f) != text.size()) {
    if (f) std::fclose(f);
    throw Failure{"cannot write '" + table_path + "'"};
  }
  std::fclose(f);
  for (size_t g = 0; g < pbftsim_load_study_group_count(study.get()); ++g) {
    pbftsim_load_fit fit{};
    check(pbftsim_load_study_fit(study.get(), g, &fit), "reading fit");
    std::printf("%s:", fit.group);
    for (size_t p = 0; p < fit.points; ++p) {
      size_t nodes = 0;
      double load = 0;
      check(pbftsim_load_study_point(study.get(), g, p, &nodes, &load), "reading point");
      std::printf(" n=%zu:%.3f", nodes, load);
    }
    std::printf("\n");
    if (fit.fitted) {
      std::printf("  fit over %zu points: load = %.5f * n + %.4f, saturation at n = %.1f\n", fit.fit_points,
                  fit.slope, fit.intercept, fit.saturation_nodes);
    }
    if (fit.warning[0] != '\0') std::fprintf(stderr, "warning: %s: %s\n", fit.group, fit.warning);
  }
  std::printf("wrote load table to %s\n", table_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event PBFT simulator for constrained IoT devices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pbftsim_version()));

  uint64_t seed = 0;
  std::string out;
  std::string trace;
  std::size_t jobs = 0;
  bool quiet = false;

  auto* run = app.add_subcommand("run", "Run one scenario and emit its report");
  std::string config_file;
  std::vector<std::string> overrides;
  run->add_option("-c,--config", config_file, "Scenario file (key = value lines)")->check(CLI::ExistingFile);
  run->add_option("overrides", overrides, "key=value overrides applied after the file");
  auto* run_seed = run->add_option("--seed", seed, "Run seed (overrides the config)");
  run->add_option("--out", out, "Write the report here instead of stdout");
  run->add_option("--trace", trace, "Write the event trace (CSV) here");

  SweepSource sweep_src;
  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid from a preset or spec file");
  auto* sweep_preset = sweep->add_option("--preset", sweep_src.preset, "Preset name (see 'presets')");
  auto* sweep_spec = sweep->add_option("--spec", sweep_src.spec_file, "Sweep spec file")->check(CLI::ExistingFile);
  sweep_preset->excludes(sweep_spec);
  auto* sweep_seed = sweep->add_option("--seed", seed, "Master seed (overrides the spec)");
  std::string sweep_out = "out";
  sweep->add_option("--out", sweep_out, "Output directory")->capture_default_str();
  sweep->add_option("--trace", trace, "Write one event trace per run into this directory");
  sweep->add_option("-j,--jobs", jobs, "Worker threads (0 = all cores)")->capture_default_str();
  sweep->add_flag("-q,--quiet", quiet, "No progress output");

  SweepSource load_src;
  auto* load = app.add_subcommand("load-study", "Measure per-node load versus network size and extrapolate");
  auto* load_preset = load->add_option("--preset", load_src.preset, "Preset name (default EXP-LOAD)");
  auto* load_spec_opt = load->add_option("--spec", load_src.spec_file, "Sweep spec file with a nodes axis")
                            ->check(CLI::ExistingFile);
  load_preset->excludes(load_spec_opt);
  auto* load_seed = load->add_option("--seed", seed, "Master seed (overrides the spec)");
  std::string load_out = "out";
  load->add_option("--out", load_out, "Output directory")->capture_default_str();
  load->add_option("--trace", trace, "Write one event trace per run into this directory");
  load->add_option("-j,--jobs", jobs, "Worker threads (0 = all cores)")->capture_default_str();
  load->add_flag("-q,--quiet", quiet, "No progress output");

  auto* presets = app.add_subcommand("presets", "List the shipped experiment presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "pbftsim: error: %s\nRun with --help for more information.\n", e.what());
    return 2;
  }

  try {
    if (run->parsed()) {
      return cmd_run(config_file, overrides, run_seed->count() ? &seed : nullptr, out, trace);
    }
    if (sweep->parsed()) {
      if (sweep_src.preset.empty() && sweep_src.spec_file.empty()) {
        throw Failure{"sweep: one of --preset or --spec is required"};
      }
      return cmd_sweep(sweep_src, sweep_seed->count() ? &seed : nullptr, sweep_out, trace, jobs, quiet);
    }
    if (load->parsed()) {
      return cmd_load_study(load_src, load_seed->count() ? &seed : nullptr, load_out, trace, jobs, quiet);
    }
    if (presets->parsed()) {
      for (size_t i = 0; i < pbftsim_preset_count(); ++i) std::printf("%s\n", pbftsim_preset_name(i));
      return 0;
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "pbftsim: error: %s\n", f.message.c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "pbftsim: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
