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
#include <memory>
#include <ostream>
#include <vector>

#include "pbftsim/config.hpp"
#include "pbftsim/metrics.hpp"
#include "pbftsim/netsim.hpp"
#include "pbftsim/replica.hpp"
#include "pbftsim/workload.hpp"

namespace pbftsim {

// How often replicas check the view-change timer.
inline constexpr SimTime kViewChangeCheckPeriod = kNanosPerSecond;
// Log pruning cadence, in observer-committed blocks.
inline constexpr SequenceNumber kPruneEvery = 10;

// One run: engine, network, n replicas, n transaction sources and the
// metrics collector. If `trace` is set, every executed event is written as
// `time_ns,event,node,bytes,detail`; the trace hash is computed either way.
class Simulation {
 public:
  explicit Simulation(const ScenarioConfig& config, std::ostream* trace = nullptr);

  // Runs every event with at <= until (clamped to the duration).
  void run_until(SimTime until);
  // Runs to the configured duration and finalizes the report.
  MetricsReport finish();

  SimTime now() const { return queue_.now(); }
  SimTime duration() const { return duration_; }
  const ScenarioConfig& config() const { return config_; }
  const Replica& replica(NodeId node) const { return *replicas_.at(node); }
  bool crashed(NodeId node) const { return crashed_.at(node) != 0; }
  const NetworkStats& network_stats() const { return network_->stats(); }
  const Network& network() const { return *network_; }
  const Metrics& metrics() const { return metrics_; }
  std::uint64_t events_executed() const { return events_; }
  std::uint64_t trace_hash() const { return trace_hash_; }
  // Packet copies still scheduled for delivery.
  std::size_t in_flight() const { return queue_.count(EventKind::kDeliver); }
  // Smallest commit certificate any replica applied a block under; SIZE_MAX
  // if nothing was committed.
  std::size_t min_certificate() const { return min_certificate_; }
  std::uint64_t commits_applied() const { return commits_applied_; }
  NodeId observer() const;

 private:
  void handle(const SimEvent& e);
  void dispatch(NodeId node, const Message& m, SimTime now);
  void apply(NodeId node, Outbox&& out, SimTime now);
  void trace(const SimEvent& e);
  void schedule_timer(NodeId node, TimerKind kind, SimTime at);

  ScenarioConfig config_;
  SimTime duration_;
  SimTime stop_generation_;
  SimTime retry_period_;
  EventQueue queue_;
  Metrics metrics_;
  BlockStore store_;
  std::unique_ptr<Network> network_;
  std::vector<std::unique_ptr<Replica>> replicas_;
  std::vector<TransactionSource> sources_;
  std::vector<std::uint8_t> crashed_;
  std::ostream* trace_out_;
  std::uint64_t trace_hash_ = 0xCBF29CE484222325ULL;
  std::uint64_t events_ = 0;
  std::size_t min_certificate_ = SIZE_MAX;
  std::uint64_t commits_applied_ = 0;
  SequenceNumber last_prune_ = 0;
  bool finished_ = false;
};

MetricsReport run_scenario(const ScenarioConfig& config, std::ostream* trace = nullptr);

}  // namespace pbftsim
