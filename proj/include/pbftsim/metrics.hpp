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
#include <deque>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pbftsim/protocol.hpp"
#include "pbftsim/sim_time.hpp"

namespace pbftsim {

class ReportFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RunNotFinished : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class BusySource : std::uint8_t { kCpu, kNic };

// Length of the union of busy intervals from two sources that each report
// intervals in non-decreasing start order. Memory stays bounded: everything
// before the caller's watermark (no future interval may start earlier) is
// folded into a running total.
class BusyTracker {
 public:
  void add(BusySource source, SimTime start, SimTime end);
  // Promise: no interval added later starts before `watermark`.
  void flush(SimTime watermark);
  // Union length within [0, horizon); consumes the tracker.
  SimTime finish(SimTime horizon);

 private:
  struct Interval {
    SimTime start;
    SimTime end;
  };
  std::deque<Interval> streams_[2];
  SimTime total_ = 0;
  SimTime accounted_until_ = 0;
};

struct MetricsReport {
  static constexpr int kSchemaVersion = 1;

  std::uint64_t seed = 0;
  double duration_s = 0.0;
  std::vector<std::uint64_t> committed_per_minute;
  std::uint64_t total_committed = 0;
  std::vector<std::uint64_t> retries_per_node;
  double avg_retries = 0.0;
  std::vector<double> load_per_node;
  double mean_load = 0.0;
  std::vector<std::uint64_t> drops_per_node;
  std::vector<std::uint64_t> ledger_heights;
  std::vector<std::uint8_t> crashed;
  std::uint64_t view_changes = 0;
  std::uint64_t final_view = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t trace_hash = 0;
  // Canonical key/value echo of the scenario that produced this report.
  std::vector<std::pair<std::string, std::string>> config;

  // Versioned line-oriented text; parse(serialize()) reproduces every field
  // exactly (doubles are written with round-trip precision).
  std::string serialize() const;
  static MetricsReport parse(const std::string& text);

  bool operator==(const MetricsReport&) const = default;
};

class Metrics {
 public:
  Metrics(std::size_t nodes, SimTime duration);

  // Commits observed at the observer; heights already counted are ignored.
  void record_commit(SimTime at, SequenceNumber height);
  void record_retry(NodeId node);
  void record_drop(NodeId node);
  void record_busy(NodeId node, SimTime start, SimTime end, BusySource source);
  // Caller promise that no busy interval will start before `now`.
  void advance(SimTime now);

  std::size_t nodes() const { return retries_.size(); }
  SimTime duration() const { return duration_; }
  const std::vector<std::uint64_t>& committed_per_minute() const { return minutes_; }
  std::uint64_t retries(NodeId node) const { return retries_[node]; }
  std::uint64_t drops(NodeId node) const { return drops_[node]; }

  // Throws RunNotFinished when `now` is short of the configured duration.
  // `live` selects the nodes whose retries are averaged.
  MetricsReport finalize(SimTime now, const std::vector<std::uint8_t>& crashed);

 private:
  SimTime duration_;
  std::vector<std::uint64_t> minutes_;
  SequenceNumber counted_height_ = 0;
  std::vector<std::uint64_t> retries_;
  std::vector<std::uint64_t> drops_;
  std::vector<BusyTracker> busy_;
  SimTime last_flush_ = 0;
  bool finalized_ = false;
};

}  // namespace pbftsim
