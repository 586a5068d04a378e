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

#include "pbftsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace pbftsim {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = s.find(',', pos);
    auto piece = trim(std::string_view(s).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (!piece.empty()) out.push_back(std::move(piece));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& v) {
  double out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("expected a finite number, got '" + v + "'");
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> m = {
      {"duration", "duration_s"},
      {"generation_period", "generation_period_s"},
      {"block_size_B", "block_size"},
      {"retry_period", "retry_period_s"},
      {"view_change_timeout", "view_change_timeout_s"},
  };
  return m;
}

std::string canonical_key(const std::string& key) {
  auto it = aliases().find(key);
  return it == aliases().end() ? key : it->second;
}

using Setter = std::function<void(ScenarioConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = {
      {"name", [](ScenarioConfig& c, const std::string& v) { c.name = v; }},
      {"nodes", [](ScenarioConfig& c, const std::string& v) { c.nodes = parse_uint(v); }},
      {"block_size", [](ScenarioConfig& c, const std::string& v) { c.block_size = parse_uint(v); }},
      {"generation_period_s", [](ScenarioConfig& c, const std::string& v) { c.generation_period_s = parse_real(v); }},
      {"jitter", [](ScenarioConfig& c, const std::string& v) { c.jitter = parse_real(v); }},
      {"generation_stop_s", [](ScenarioConfig& c, const std::string& v) { c.generation_stop_s = parse_real(v); }},
      {"device_profile", [](ScenarioConfig&, const std::string&) {}},  // applied first
      {"link_rate_bps", [](ScenarioConfig& c, const std::string& v) { c.profile.link_rate_bps = parse_real(v); }},
      {"per_message_processing_s",
       [](ScenarioConfig& c, const std::string& v) { c.profile.per_message_processing_s = parse_real(v); }},
      {"per_byte_processing_s",
       [](ScenarioConfig& c, const std::string& v) { c.profile.per_byte_processing_s = parse_real(v); }},
      {"buffer_capacity_bytes",
       [](ScenarioConfig& c, const std::string& v) { c.profile.buffer_capacity_bytes = parse_uint(v); }},
      {"tx_payload_bytes",
       [](ScenarioConfig& c, const std::string& v) {
         const auto n = parse_uint(v);
         if (n > 0xFFFFFFFFULL) throw ConfigError("too large");
         c.profile.tx_payload_bytes = static_cast<std::uint32_t>(n);
       }},
      {"latency", [](ScenarioConfig& c, const std::string& v) { c.latency.dist = parse_latency_dist(lower(v)); }},
      {"latency_mode",
       [](ScenarioConfig& c, const std::string& v) { c.latency.mode = parse_latency_mode(lower(v)); }},
      {"window", [](ScenarioConfig& c, const std::string& v) { c.window = parse_uint(v); }},
      {"latency_mean_s", [](ScenarioConfig& c, const std::string& v) { c.latency.mean_s = parse_real(v); }},
      {"latency_normal_sigma_ratio",
       [](ScenarioConfig& c, const std::string& v) { c.latency.normal_sigma_ratio = parse_real(v); }},
      {"duration_s", [](ScenarioConfig& c, const std::string& v) { c.duration_s = parse_real(v); }},
      {"retry_period_s", [](ScenarioConfig& c, const std::string& v) { c.retry_period_s = parse_real(v); }},
      {"view_change_timeout_s",
       [](ScenarioConfig& c, const std::string& v) { c.view_change_timeout_s = parse_real(v); }},
      {"propagation_s", [](ScenarioConfig& c, const std::string& v) { c.propagation_s = parse_real(v); }},
      {"seed", [](ScenarioConfig& c, const std::string& v) { c.seed = parse_uint(v); }},
      {"crashes",
       [](ScenarioConfig& c, const std::string& v) {
         c.crashes.clear();
         if (lower(v) == "none") return;
         for (const auto& item : split_list(v)) {
           const auto at = item.find('@');
           if (at == std::string::npos) throw ConfigError("expected node@seconds, got '" + item + "'");
           c.crashes.push_back({parse_uint(trim(item.substr(0, at))), parse_real(trim(item.substr(at + 1)))});
         }
       }},
      {"equivocators",
       [](ScenarioConfig& c, const std::string& v) {
         c.equivocators.clear();
         if (lower(v) == "none") return;
         for (const auto& item : split_list(v)) c.equivocators.push_back(parse_uint(item));
       }},
  };
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  std::map<std::string, std::size_t> seen;
  std::istringstream is(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto sep = line.find_first_of("=:");
    if (sep == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    ConfigLine cl{trim(std::string_view(line).substr(0, sep)), trim(std::string_view(line).substr(sep + 1)), lineno};
    if (cl.key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    auto [it, fresh] = seen.emplace(cl.key, lineno);
    if (!fresh) {
      throw ConfigError("config line " + std::to_string(lineno) + ": key '" + cl.key + "' already set on line " +
                        std::to_string(it->second));
    }
    doc.lines_.push_back(std::move(cl));
  }
  return doc;
}

const ConfigLine* ConfigDocument::find(const std::string& key) const {
  for (const auto& l : lines_) {
    if (l.key == key) return &l;
  }
  return nullptr;
}

void ConfigDocument::set(const std::string& key, const std::string& value) {
  for (auto& l : lines_) {
    if (canonical_key(l.key) == canonical_key(key)) {
      l.value = value;
      return;
    }
  }
  lines_.push_back({key, value, 0});
}

void ConfigDocument::erase(const std::string& key) {
  std::erase_if(lines_, [&](const ConfigLine& l) { return l.key == key; });
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, value] : ScenarioConfig{}.echo()) k.push_back(key);
    return k;
  }();
  return keys;
}

void ScenarioConfig::validate() const {
  auto fail = [](const char* field, const std::string& why) { throw ConfigFieldError(field, why); };
  if (nodes < 1) fail("nodes", "must be at least 1");
  if (nodes > 0xFFFFFFFFULL) fail("nodes", "must fit in a 32-bit sender id");
  if (block_size < 1) fail("block_size", "must be at least 1");
  if (!(generation_period_s > 0.0)) fail("generation_period_s", "must be positive");
  if (!(jitter >= 0.0 && jitter < 1.0)) fail("jitter", "must be in [0, 1)");
  if (!(duration_s >= 60.0) || std::fmod(duration_s, 60.0) != 0.0) {
    fail("duration_s", "must be a positive multiple of 60");
  }
  if (generation_stop_s && !(*generation_stop_s >= 0.0 && *generation_stop_s <= duration_s)) {
    fail("generation_stop_s", "must be within [0, duration_s]");
  }
  if (!(retry_period_s > 0.0)) fail("retry_period_s", "must be positive");
  if (!(view_change_timeout_s > 0.0)) fail("view_change_timeout_s", "must be positive");
  if (!(propagation_s >= 0.0)) fail("propagation_s", "must be non-negative");
  std::set<NodeId> crashed;
  for (const auto& c : crashes) {
    if (c.node >= nodes) fail("crashes", "node " + std::to_string(c.node) + " out of range");
    if (!(c.at_s >= 0.0 && c.at_s <= duration_s)) fail("crashes", "crash time must be within [0, duration_s]");
    if (!crashed.insert(c.node).second) fail("crashes", "node " + std::to_string(c.node) + " listed twice");
  }
  for (auto e : equivocators) {
    if (e >= nodes) fail("equivocators", "node " + std::to_string(e) + " out of range");
  }
  try {
    profile.validate();
    latency.validate();
  } catch (const ConfigFieldError&) {
    throw;
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const auto space = msg.find(' ');
    throw ConfigFieldError(msg.substr(0, space), msg.substr(space + 1));
  }
}

std::vector<std::pair<std::string, std::string>> ScenarioConfig::echo() const {
  auto join_crashes = [&] {
    if (crashes.empty()) return std::string("none");
    std::string s;
    for (const auto& c : crashes) s += (s.empty() ? "" : ",") + std::to_string(c.node) + "@" + fmt(c.at_s);
    return s;
  };
  auto join_nodes = [&] {
    if (equivocators.empty()) return std::string("none");
    std::string s;
    for (auto e : equivocators) s += (s.empty() ? "" : ",") + std::to_string(e);
    return s;
  };
  return {
      {"name", name},
      {"nodes", std::to_string(nodes)},
      {"block_size", std::to_string(block_size)},
      {"generation_period_s", fmt(generation_period_s)},
      {"jitter", fmt(jitter)},
      {"generation_stop_s", fmt(generation_stop_s.value_or(duration_s))},
      {"device_profile", device_profile},
      {"link_rate_bps", fmt(profile.link_rate_bps)},
      {"per_message_processing_s", fmt(profile.per_message_processing_s)},
      {"per_byte_processing_s", fmt(profile.per_byte_processing_s)},
      {"buffer_capacity_bytes", std::to_string(profile.buffer_capacity_bytes)},
      {"tx_payload_bytes", std::to_string(profile.tx_payload_bytes)},
      {"latency", to_string(latency.dist)},
      {"latency_mode", to_string(latency.mode)},
      {"latency_mean_s", fmt(latency.mean_s)},
      {"latency_normal_sigma_ratio", fmt(latency.normal_sigma_ratio)},
      {"duration_s", fmt(duration_s)},
      {"retry_period_s", fmt(retry_period_s)},
      {"view_change_timeout_s", fmt(view_change_timeout_s)},
      {"propagation_s", fmt(propagation_s)},
      {"window", std::to_string(window)},
      {"seed", std::to_string(seed)},
      {"crashes", join_crashes()},
      {"equivocators", join_nodes()},
  };
}

std::string ScenarioConfig::to_text() const {
  std::string s;
  for (const auto& [k, v] : echo()) s += k + " = " + v + "\n";
  return s;
}

ScenarioConfig config_from_document(const ConfigDocument& doc) {
  ScenarioConfig c;
  auto at_line = [](const ConfigLine& l) {
    return l.line ? "config line " + std::to_string(l.line) + ": " : std::string("config override: ");
  };
  std::map<std::string, const ConfigLine*> by_key;
  for (const auto& l : doc.lines()) {
    const auto key = canonical_key(l.key);
    if (!setters().count(key)) throw ConfigError(at_line(l) + "unknown key '" + l.key + "'");
    if (!by_key.emplace(key, &l).second) {
      throw ConfigError(at_line(l) + "key '" + l.key + "' set twice (alias of '" + key + "')");
    }
  }
  if (auto it = by_key.find("device_profile"); it != by_key.end()) {
    try {
      c.profile = DeviceProfile::preset(it->second->value);
      c.device_profile = it->second->value;
    } catch (const ConfigError& e) {
      throw ConfigError(at_line(*it->second) + "key 'device_profile': " + e.what());
    }
  }
  for (const auto& l : doc.lines()) {
    const auto key = canonical_key(l.key);
    try {
      setters().at(key)(c, l.value);
    } catch (const ConfigError& e) {
      throw ConfigError(at_line(l) + "key '" + l.key + "': " + e.what());
    }
  }
  try {
    c.validate();
  } catch (const ConfigFieldError& e) {
    auto it = by_key.find(e.field());
    if (it != by_key.end()) throw ConfigError(at_line(*it->second) + e.what());
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ScenarioConfig parse_config(const std::string& text) { return config_from_document(ConfigDocument::parse(text)); }

// ---------------------------------------------------------------------------

namespace {

std::vector<ConfigDocument> point_documents(const SweepSpec& spec) {
  std::vector<ConfigDocument> docs{spec.base};
  for (const auto& axis : spec.axes) {
    std::vector<ConfigDocument> next;
    for (const auto& d : docs) {
      for (const auto& v : axis.values) {
        auto copy = d;
        copy.set(axis.key, v);
        next.push_back(std::move(copy));
      }
    }
    docs = std::move(next);
  }
  return docs;
}

}  // namespace

std::size_t SweepSpec::points() const {
  std::size_t p = 1;
  for (const auto& a : axes) p *= a.values.size();
  return p;
}

std::uint64_t SweepSpec::master_seed() const {
  const auto* l = base.find("seed");
  return l ? parse_uint(l->value) : ScenarioConfig{}.seed;
}

void SweepSpec::validate() const {
  if (repetitions < 1) throw ConfigError("sweep: repetitions must be at least 1");
  if (!(linear_region_max_load > 0.0 && linear_region_max_load <= 1.0)) {
    throw ConfigError("sweep: linear_region_max_load must be in (0, 1]");
  }
  std::set<std::string> keys;
  for (const auto& a : axes) {
    const auto key = canonical_key(a.key);
    if (!setters().count(key)) throw ConfigError("sweep: unknown axis key '" + a.key + "'");
    if (key == "seed") throw ConfigError("sweep: seeds are derived; 'seed' cannot be an axis");
    if (!keys.insert(key).second) throw ConfigError("sweep: axis '" + a.key + "' repeated");
    if (a.values.empty()) throw ConfigError("sweep: axis '" + a.key + "' has no values");
  }
  config_from_document(base);
  for (const auto& d : point_documents(*this)) config_from_document(d);
}

SweepSpec parse_sweep(const std::string& text) {
  const auto doc = ConfigDocument::parse(text);
  SweepSpec spec;
  for (const auto& l : doc.lines()) {
    try {
      if (l.key.rfind("sweep.", 0) == 0) {
        spec.axes.push_back({l.key.substr(6), split_list(l.value)});
      } else if (l.key == "repetitions") {
        spec.repetitions = parse_uint(l.value);
      } else if (l.key == "seed_policy") {
        if (l.value == "per-run") {
          spec.seed_policy = SeedPolicy::kPerRun;
        } else if (l.value == "per-repetition") {
          spec.seed_policy = SeedPolicy::kPerRepetition;
        } else {
          throw ConfigError("expected 'per-run' or 'per-repetition', got '" + l.value + "'");
        }
      } else if (l.key == "sweep_name") {
        spec.name = l.value;
      } else if (l.key == "linear_region_max_load") {
        spec.linear_region_max_load = parse_real(l.value);
      } else {
        spec.base.append(l);
      }
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(l.line) + ": key '" + l.key + "': " + e.what());
    }
  }
  spec.validate();
  return spec;
}

void set_master_seed(SweepSpec& spec, std::uint64_t seed) { spec.base.set("seed", std::to_string(seed)); }

}  // namespace pbftsim
