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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbftsim/config.hpp"
#include "pbftsim/metrics.hpp"

namespace pbftsim {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CsvFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// presets

// The shipped experiment presets, in canonical order.
const std::vector<std::string>& preset_names();
// Directory holding the preset files: $PBFTSIM_PRESET_DIR if set, else the
// directory recorded at build time.
std::string preset_directory();
std::string preset_path(const std::string& name);
SweepSpec load_preset(const std::string& name);
std::string read_text_file(const std::string& path);

// ---------------------------------------------------------------------------
// sweeps

struct PlannedRun {
  std::size_t index = 0;       // position in spec order
  std::size_t point = 0;       // grid point
  std::size_t repetition = 0;
  std::string axis_value;      // "key=value;key=value", or "-" without axes
  ScenarioConfig config;       // seed already derived
};

struct RunRecord {
  std::size_t index = 0;
  std::size_t point = 0;
  std::size_t repetition = 0;
  std::string axis_value;
  std::uint64_t seed = 0;
  MetricsReport report;
};

struct SweepResult {
  std::string name;
  std::vector<RunRecord> runs;  // spec order
};

std::uint64_t derive_run_seed(std::uint64_t master, SeedPolicy policy, std::size_t point, std::size_t repetition);
std::vector<PlannedRun> plan_sweep(const SweepSpec& spec);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

// Runs every planned scenario on `jobs` worker threads (0 = hardware
// concurrency). Output order is spec order regardless of completion order.
// With a non-empty `trace_dir`, each run writes its event trace to
// <trace_dir>/<scenario id>.trace.
SweepResult run_sweep(const SweepSpec& spec, std::size_t jobs = 1, const ProgressFn& progress = {},
                      const std::string& trace_dir = {});

// ---------------------------------------------------------------------------
// load study

struct LoadPoint {
  std::size_t nodes = 0;
  double mean_load = 0.0;
  std::size_t runs = 0;
};

struct LoadFit {
  std::string group;  // axis values other than nodes, e.g. "device_profile=IMPLANT"
  std::vector<LoadPoint> points;
  bool monotone = true;
  bool fitted = false;
  std::size_t fit_points = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double saturation_nodes = 0.0;  // where the fitted line reaches load 1.0
  std::string warning;
};

// Least-squares line through the points below `max_load` (the linear
// region). A curve that decreases anywhere is reported without
// extrapolation and with a warning.
LoadFit fit_load_curve(std::string group, std::vector<LoadPoint> points, double max_load);

struct LoadStudyResult {
  SweepResult sweep;
  std::vector<LoadFit> fits;
};

// The spec must sweep `nodes`; every other axis value combination forms one
// curve.
LoadStudyResult run_load_study(const SweepSpec& spec, std::size_t jobs = 1, const ProgressFn& progress = {},
                               const std::string& trace_dir = {});

// ---------------------------------------------------------------------------
// output

struct CsvRow {
  std::string scenario_id;
  std::string axis_value;
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  std::size_t minute = 0;
  std::uint64_t committed = 0;
  bool operator==(const CsvRow&) const = default;
};

inline constexpr const char* kCsvHeader = "scenario_id,axis_value,repetition,seed,minute,committed";

std::string scenario_id(const RunRecord& r);
std::vector<CsvRow> csv_rows(const SweepResult& result);
std::string render_csv(const SweepResult& result);
std::vector<CsvRow> parse_csv(const std::string& text);
// One row per run: totals, retries, load, drops.
std::string render_summary_csv(const SweepResult& result);
// Per curve (axis value), the per-minute mean over repetitions; curves are
// gnuplot index blocks separated by two blank lines.
std::string render_plot_data(const SweepResult& result);
std::string render_load_table(const LoadStudyResult& result);

// Throw EmptyInput without runs and IoError naming the path on failure.
void emit_csv(const SweepResult& result, const std::string& path);
void emit_plot_data(const SweepResult& result, const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pbftsim
