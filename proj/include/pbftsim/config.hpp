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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pbftsim/netsim.hpp"

namespace pbftsim {

// A config error attributable to one field.
class ConfigFieldError : public ConfigError {
 public:
  ConfigFieldError(std::string field, const std::string& constraint)
      : ConfigError("key '" + field + "': " + constraint), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// One `key = value` line of a config document. `:` is accepted in place of
// `=`; `#` starts a comment.
struct ConfigLine {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// Ordered key/value lines with their source line numbers, so diagnostics
// raised after parsing can still point at the offending line.
class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& text);

  const std::vector<ConfigLine>& lines() const { return lines_; }
  const ConfigLine* find(const std::string& key) const;
  // Replaces the value of an existing key or appends a new line (line 0).
  void set(const std::string& key, const std::string& value);
  void erase(const std::string& key);
  void append(ConfigLine line) { lines_.push_back(std::move(line)); }

 private:
  std::vector<ConfigLine> lines_;
};

struct CrashFault {
  NodeId node = 0;
  double at_s = 0.0;
  bool operator==(const CrashFault&) const = default;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::size_t nodes = 5;
  std::size_t block_size = 5;
  double generation_period_s = 5.0;
  double jitter = 0.0;
  // Transactions stop being created at this time; defaults to the duration.
  std::optional<double> generation_stop_s;
  std::string device_profile = "MCU8";
  // Resolved from device_profile, then per-field overrides.
  DeviceProfile profile = DeviceProfile::preset("MCU8");
  LatencyModel latency;
  double duration_s = 1800.0;
  double retry_period_s = 10.0;
  double view_change_timeout_s = 30.0;
  double propagation_s = 0.0;
  std::size_t window = 0;
  std::uint64_t seed = 1;
  std::vector<CrashFault> crashes;
  std::vector<NodeId> equivocators;

  // Throws ConfigError naming the field and the violated constraint.
  void validate() const;
  // Canonical key/value form of every field; parse_config(to_text())
  // reproduces the config.
  std::vector<std::pair<std::string, std::string>> echo() const;
  std::string to_text() const;
};

// Keys accepted by parse_config, in canonical order.
const std::vector<std::string>& config_keys();

ScenarioConfig parse_config(const std::string& text);
ScenarioConfig config_from_document(const ConfigDocument& doc);

enum class SeedPolicy : std::uint8_t {
  kPerRun,         // every (point, repetition) gets its own derived seed
  kPerRepetition,  // seeds depend on the repetition only (common random numbers)
};

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

// A grid of scenarios: the cartesian product of the axes (first axis varies
// slowest) times `repetitions`. The base `seed` is the master seed.
struct SweepSpec {
  std::string name = "sweep";
  ConfigDocument base;
  std::vector<SweepAxis> axes;
  std::size_t repetitions = 1;
  SeedPolicy seed_policy = SeedPolicy::kPerRun;
  // Load-study fit: points with mean load at or above this are treated as
  // saturated and excluded from the linear region.
  double linear_region_max_load = 0.95;

  void validate() const;
  std::size_t points() const;
  std::uint64_t master_seed() const;
};

// Sweep files reuse the scenario keys for the base, plus `sweep.<key> = v1,
// v2, ...` axes and the `repetitions`, `seed_policy`, `sweep_name` and
// `linear_region_max_load` keys.
SweepSpec parse_sweep(const std::string& text);
void set_master_seed(SweepSpec& spec, std::uint64_t seed);

}  // namespace pbftsim
