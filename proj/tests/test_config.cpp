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


#include <string>

#include "doctest.h"
#include "pbftsim/config.hpp"

using namespace pbftsim;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("a minimal config takes documented defaults") {
  const auto c = parse_config("nodes = 5\n");
  CHECK(c.nodes == 5);
  CHECK(c.block_size == 5);
  CHECK(c.generation_period_s == 5.0);
  CHECK(c.duration_s == 1800.0);
  CHECK(c.retry_period_s == 10.0);
  CHECK(c.view_change_timeout_s == 30.0);
  CHECK(c.latency.dist == LatencyDist::kNone);
  CHECK(c.device_profile == "MCU8");
  CHECK(c.profile.link_rate_bps == 10e6);
  CHECK(c.profile.tx_payload_bytes == 1000);
  CHECK(c.crashes.empty());
}

TEST_CASE("comments, colons and aliases") {
  const auto c = parse_config(
      "# header\n"
      "nodes: 7   # trailing\n"
      "block_size_B = 10\n"
      "duration = 600\n"
      "retry_period = 4\n"
      "crashes = 1@0, 2@30.5\n");
  CHECK(c.nodes == 7);
  CHECK(c.block_size == 10);
  CHECK(c.duration_s == 600.0);
  CHECK(c.retry_period_s == 4.0);
  REQUIRE(c.crashes.size() == 2);
  CHECK(c.crashes[1] == CrashFault{2, 30.5});
}

TEST_CASE("device profiles and per-field overrides") {
  auto c = parse_config("device_profile = IMPLANT\n");
  CHECK(c.profile.tx_payload_bytes == 16);
  c = parse_config("tx_payload_bytes = 64\ndevice_profile = MCU32\n");
  CHECK(c.profile.tx_payload_bytes == 64);
  CHECK(c.profile.link_rate_bps == 100e6);
  CHECK(contains(error_of("device_profile = TOASTER\n"), "device_profile"));
}

TEST_CASE("diagnostics name the field, the constraint and the line") {
  const auto e0 = error_of("block_size = 5\nnodes = 0\n");
  CHECK(contains(e0, "line 2"));
  CHECK(contains(e0, "nodes"));
  CHECK(contains(e0, "at least 1"));
  const auto e1 = error_of("duration_s = 90\n");
  CHECK(contains(e1, "duration_s"));
  CHECK(contains(e1, "multiple of 60"));
  CHECK(contains(error_of("colour = blue\n"), "unknown key 'colour'"));
  CHECK(contains(error_of("nodes\n"), "line 1"));
  CHECK(contains(error_of("nodes = 4\nnodes = 5\n"), "already set on line 1"));
  CHECK(contains(error_of("duration = 60\nduration_s = 60\n"), "set twice"));
  CHECK(contains(error_of("nodes = -3\n"), "non-negative integer"));
  CHECK(contains(error_of("jitter = 1.5\n"), "jitter"));
  CHECK(contains(error_of("nodes = 4\ncrashes = 4@0\n"), "out of range"));
  CHECK(contains(error_of("crashes = 1@0,1@5\n"), "twice"));
  CHECK(contains(error_of("latency = exponential\n"), "latency"));
  CHECK(contains(error_of("latency = cauchy\n"), "latency"));
  CHECK(contains(error_of("generation_stop_s = 4000\n"), "generation_stop_s"));
}

TEST_CASE("to_text round-trips every field") {
  ScenarioConfig c;
  c.name = "rt";
  c.nodes = 13;
  c.block_size = 7;
  c.generation_period_s = 2.5;
  c.jitter = 0.3;
  c.generation_stop_s = 1200.0;
  c.device_profile = "MCU32";
  c.profile = DeviceProfile::preset("MCU32");
  c.profile.buffer_capacity_bytes = 4096;
  c.latency = {LatencyDist::kNormal, LatencyMode::kTransit, 0.1, 0.25};
  c.duration_s = 1200;
  c.window = 3;
  c.seed = 0xFFFFFFFFFFFFFFFFULL;
  c.crashes = {{3, 12.25}, {5, 0}};
  c.equivocators = {0};
  const auto back = parse_config(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.echo() == c.echo());
  CHECK(back.profile.buffer_capacity_bytes == 4096);
  CHECK(back.latency.mode == LatencyMode::kTransit);
  CHECK(back.seed == c.seed);
  CHECK(config_keys().size() == c.echo().size());
}

TEST_CASE("document set and erase") {
  auto doc = ConfigDocument::parse("duration = 60\nnodes = 4\n");
  doc.set("duration_s", "120");  // resolves the alias
  CHECK(doc.lines().size() == 2);
  CHECK(config_from_document(doc).duration_s == 120.0);
  doc.set("block_size", "3");
  CHECK(doc.find("block_size")->line == 0);
  doc.erase("nodes");
  CHECK(config_from_document(doc).nodes == 5);
  doc.set("nodes", "0");
  CHECK_THROWS_WITH_AS(config_from_document(doc), doctest::Contains("config override"), ConfigError);
}

TEST_CASE("sweep files") {
  const auto s = parse_sweep(
      "sweep_name = demo\n"
      "duration_s = 60\n"
      "seed = 9\n"
      "sweep.block_size = 5, 10\n"
      "sweep.nodes = 4,7,10\n"
      "repetitions = 2\n"
      "seed_policy = per-repetition\n");
  CHECK(s.name == "demo");
  CHECK(s.axes.size() == 2);
  CHECK(s.points() == 6);
  CHECK(s.repetitions == 2);
  CHECK(s.seed_policy == SeedPolicy::kPerRepetition);
  CHECK(s.master_seed() == 9);
  auto copy = s;
  set_master_seed(copy, 77);
  CHECK(copy.master_seed() == 77);

  CHECK_THROWS_AS(parse_sweep("sweep.seed = 1,2\n"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("sweep.bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("sweep.nodes = \n"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("repetitions = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("seed_policy = sometimes\n"), ConfigError);
  // Every grid point is validated up front.
  CHECK_THROWS_WITH_AS(parse_sweep("sweep.nodes = 4, 0\n"), doctest::Contains("nodes"), ConfigError);
}
