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

#include "pbftsim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "pbftsim/scenario.hpp"

#ifndef PBFTSIM_PRESET_DIR
#define PBFTSIM_PRESET_DIR "presets"
#endif

namespace pbftsim {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

template <typename T>
T parse_field(const std::string& s, std::size_t line, const char* what) {
  T v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw CsvFormatError("csv line " + std::to_string(line) + ": invalid " + what + " '" + s + "'");
  }
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// presets and files

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"EXP-BLOCKSIZE", "EXP-RETRY", "EXP-GENPERIOD", "EXP-LATENCY",
                                                 "EXP-LOAD"};
  return names;
}

std::string preset_directory() {
  if (const char* env = std::getenv("PBFTSIM_PRESET_DIR"); env && *env) return env;
  return PBFTSIM_PRESET_DIR;
}

std::string preset_path(const std::string& name) {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string known;
    for (const auto& n : names) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  return preset_directory() + "/" + lower(name) + ".conf";
}

SweepSpec load_preset(const std::string& name) {
  const auto path = preset_path(name);
  try {
    return parse_sweep(read_text_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading: " + std::strerror(errno));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing: " + std::strerror(errno));
  out << text;
  out.flush();
  if (!out) throw IoError("error writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// sweeps

std::uint64_t derive_run_seed(std::uint64_t master, SeedPolicy policy, std::size_t point, std::size_t repetition) {
  const std::uint64_t m = mix64(master);
  if (policy == SeedPolicy::kPerRepetition) return mix64(m ^ mix64(repetition + 1));
  return mix64(m ^ mix64((static_cast<std::uint64_t>(point) << 32) + repetition + 1));
}

std::vector<PlannedRun> plan_sweep(const SweepSpec& spec) {
  spec.validate();
  const std::uint64_t master = spec.master_seed();
  const std::size_t points = spec.points();
  std::vector<PlannedRun> plan;
  plan.reserve(points * spec.repetitions);
  for (std::size_t p = 0; p < points; ++p) {
    ConfigDocument doc = spec.base;
    std::string label;
    std::size_t rest = p;
    std::vector<std::size_t> idx(spec.axes.size());
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      idx[a] = rest % spec.axes[a].values.size();
      rest /= spec.axes[a].values.size();
    }
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      const auto& v = spec.axes[a].values[idx[a]];
      doc.set(spec.axes[a].key, v);
      label += (label.empty() ? "" : ";") + spec.axes[a].key + "=" + v;
    }
    if (label.empty()) label = "-";
    const ScenarioConfig base = config_from_document(doc);
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
      PlannedRun run;
      run.index = plan.size();
      run.point = p;
      run.repetition = r;
      run.axis_value = label;
      run.config = base;
      run.config.seed = derive_run_seed(master, spec.seed_policy, p, r);
      plan.push_back(std::move(run));
    }
  }
  return plan;
}

SweepResult run_sweep(const SweepSpec& spec, std::size_t jobs, const ProgressFn& progress,
                      const std::string& trace_dir) {
  const auto plan = plan_sweep(spec);
  SweepResult result;
  result.name = spec.name;
  result.runs.resize(plan.size());
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, std::max<std::size_t>(plan.size(), 1));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::exception_ptr error;
  std::size_t done = 0;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= plan.size() || failed) return;
      try {
        RunRecord rec;
        rec.index = plan[i].index;
        rec.point = plan[i].point;
        rec.repetition = plan[i].repetition;
        rec.axis_value = plan[i].axis_value;
        rec.seed = plan[i].config.seed;
        if (trace_dir.empty()) {
          rec.report = run_scenario(plan[i].config);
        } else {
          const std::string path = trace_dir + "/" + scenario_id(rec) + ".trace";
          std::ofstream trace(path);
          if (!trace) throw IoError("cannot open trace file '" + path + "'");
          rec.report = run_scenario(plan[i].config, &trace);
          if (!trace) throw IoError("failed writing trace file '" + path + "'");
        }
        result.runs[i] = std::move(rec);
        std::lock_guard lock(mu);
        ++done;
        if (progress) progress(done, plan.size());
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return result;
}

// ---------------------------------------------------------------------------
// load study

LoadFit fit_load_curve(std::string group, std::vector<LoadPoint> points, double max_load) {
  LoadFit fit;
  fit.group = std::move(group);
  std::sort(points.begin(), points.end(), [](const LoadPoint& a, const LoadPoint& b) { return a.nodes < b.nodes; });
  fit.points = points;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].mean_load < points[i - 1].mean_load) fit.monotone = false;
  }
  if (!fit.monotone) {
    fit.warning = "load is not monotone in nodes; no extrapolation";
    return fit;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t k = 0;
  for (const auto& p : points) {
    if (p.mean_load >= max_load) continue;
    const double x = static_cast<double>(p.nodes);
    sx += x;
    sy += p.mean_load;
    sxx += x * x;
    sxy += x * p.mean_load;
    ++k;
  }
  fit.fit_points = k;
  const double denom = static_cast<double>(k) * sxx - sx * sx;
  if (k < 2 || denom == 0.0) {
    fit.warning = "fewer than two points in the linear region; no extrapolation";
    return fit;
  }
  fit.slope = (static_cast<double>(k) * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / static_cast<double>(k);
  if (!(fit.slope > 0.0)) {
    fit.warning = "fitted slope is not positive; no extrapolation";
    return fit;
  }
  fit.fitted = true;
  fit.saturation_nodes = (1.0 - fit.intercept) / fit.slope;
  return fit;
}

LoadStudyResult run_load_study(const SweepSpec& spec, std::size_t jobs, const ProgressFn& progress,
                               const std::string& trace_dir) {
  const bool has_nodes = std::any_of(spec.axes.begin(), spec.axes.end(), [](const SweepAxis& a) { return a.key == "nodes"; });
  if (!has_nodes) throw ConfigError("load study: the sweep must have a 'sweep.nodes' axis");
  LoadStudyResult out;
  out.sweep = run_sweep(spec, jobs, progress, trace_dir);

  std::vector<std::string> order;
  std::map<std::string, std::map<std::size_t, std::pair<double, std::size_t>>> acc;
  for (const auto& r : out.sweep.runs) {
    std::string group;
    std::size_t nodes = 0;
    std::istringstream parts(r.axis_value);
    std::string part;
    while (std::getline(parts, part, ';')) {
      if (part.rfind("nodes=", 0) == 0) {
        nodes = std::stoul(part.substr(6));
      } else {
        group += (group.empty() ? "" : ";") + part;
      }
    }
    if (group.empty()) group = "-";
    if (!acc.count(group)) order.push_back(group);
    auto& cell = acc[group][nodes];
    cell.first += r.report.mean_load;
    ++cell.second;
  }
  for (const auto& g : order) {
    std::vector<LoadPoint> pts;
    for (const auto& [nodes, cell] : acc[g]) pts.push_back({nodes, cell.first / static_cast<double>(cell.second), cell.second});
    out.fits.push_back(fit_load_curve(g, std::move(pts), spec.linear_region_max_load));
  }
  return out;
}

// ---------------------------------------------------------------------------
// output

std::string scenario_id(const RunRecord& r) {
  std::string n = std::to_string(r.index);
  if (n.size() < 4) n.insert(0, 4 - n.size(), '0');
  return "s" + n;
}

std::vector<CsvRow> csv_rows(const SweepResult& result) {
  std::vector<CsvRow> rows;
  for (const auto& r : result.runs) {
    for (std::size_t m = 0; m < r.report.committed_per_minute.size(); ++m) {
      rows.push_back({scenario_id(r), r.axis_value, r.repetition, r.seed, m, r.report.committed_per_minute[m]});
    }
  }
  return rows;
}

std::string render_csv(const SweepResult& result) {
  std::string s = std::string(kCsvHeader) + "\n";
  for (const auto& row : csv_rows(result)) {
    s += row.scenario_id + ',' + row.axis_value + ',' + std::to_string(row.repetition) + ',' + std::to_string(row.seed) +
         ',' + std::to_string(row.minute) + ',' + std::to_string(row.committed) + '\n';
  }
  return s;
}

std::vector<CsvRow> parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw CsvFormatError("csv line 1: unexpected header");
  std::vector<CsvRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    for (;;) {
      const auto comma = line.find(',', pos);
      f.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (f.size() != 6) throw CsvFormatError("csv line " + std::to_string(lineno) + ": expected 6 fields");
    rows.push_back({f[0], f[1], parse_field<std::size_t>(f[2], lineno, "repetition"),
                    parse_field<std::uint64_t>(f[3], lineno, "seed"), parse_field<std::size_t>(f[4], lineno, "minute"),
                    parse_field<std::uint64_t>(f[5], lineno, "committed")});
  }
  return rows;
}

std::string render_summary_csv(const SweepResult& result) {
  std::string s =
      "scenario_id,axis_value,repetition,seed,total_committed,avg_retries,mean_load,drops,view_changes,final_view\n";
  for (const auto& r : result.runs) {
    std::uint64_t drops = 0;
    for (auto d : r.report.drops_per_node) drops += d;
    s += scenario_id(r) + ',' + r.axis_value + ',' + std::to_string(r.repetition) + ',' + std::to_string(r.seed) + ',' +
         std::to_string(r.report.total_committed) + ',' + fmt(r.report.avg_retries) + ',' + fmt(r.report.mean_load) +
         ',' + std::to_string(drops) + ',' + std::to_string(r.report.view_changes) + ',' +
         std::to_string(r.report.final_view) + '\n';
  }
  return s;
}

std::string render_plot_data(const SweepResult& result) {
  if (result.runs.empty()) throw EmptyInput("no reports to render");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> curves;
  for (const auto& r : result.runs) {
    if (!curves.count(r.axis_value)) order.push_back(r.axis_value);
    curves[r.axis_value].push_back(&r);
  }
  std::string s;
  for (std::size_t c = 0; c < order.size(); ++c) {
    const auto& runs = curves[order[c]];
    if (c) s += "\n\n";
    s += "# curve " + order[c] + " runs=" + std::to_string(runs.size()) + "\n";
    s += "# minute mean_committed\n";
    const std::size_t minutes = runs.front()->report.committed_per_minute.size();
    for (std::size_t m = 0; m < minutes; ++m) {
      double sum = 0;
      for (const auto* r : runs) sum += static_cast<double>(r->report.committed_per_minute.at(m));
      s += std::to_string(m) + ' ' + fmt(sum / static_cast<double>(runs.size())) + '\n';
    }
  }
  return s;
}

std::string render_load_table(const LoadStudyResult& result) {
  std::string s = "group,nodes,mean_load,runs\n";
  for (const auto& f : result.fits) {
    for (const auto& p : f.points) {
      s += f.group + ',' + std::to_string(p.nodes) + ',' + fmt(p.mean_load) + ',' + std::to_string(p.runs) + '\n';
    }
  }
  s += "\ngroup,monotone,fit_points,slope,intercept,saturation_nodes,warning\n";
  for (const auto& f : result.fits) {
    s += f.group + ',' + (f.monotone ? "1" : "0") + ',' + std::to_string(f.fit_points) + ',' + fmt(f.slope) + ',' +
         fmt(f.intercept) + ',' + (f.fitted ? fmt(f.saturation_nodes) : std::string("")) + ',' + f.warning + '\n';
  }
  return s;
}

void emit_csv(const SweepResult& result, const std::string& path) {
  if (result.runs.empty()) throw EmptyInput("no reports to write to '" + path + "'");
  write_text_file(path, render_csv(result));
}

void emit_plot_data(const SweepResult& result, const std::string& path) {
  if (result.runs.empty()) throw EmptyInput("no reports to write to '" + path + "'");
  write_text_file(path, render_plot_data(result));
}

}  // namespace pbftsim
