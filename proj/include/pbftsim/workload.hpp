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
#include <random>

#include "pbftsim/protocol.hpp"
#include "pbftsim/sim_time.hpp"

namespace pbftsim {

struct WorkloadConfig {
  std::size_t nodes = 1;
  SimTime period = 5 * kNanosPerSecond;
  // Each gap is period * (1 + jitter * u), u uniform on [-1, 1].
  double jitter = 0.0;
  std::uint32_t payload_bytes = 1000;
  // No transaction is created at or after this time.
  SimTime stop = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Per-node transaction source. Node k first fires at (k / n) * period so
// sources are evenly staggered; ids are unique per run because they embed
// the origin node and a per-node counter.
class TransactionSource {
 public:
  TransactionSource(const WorkloadConfig& config, NodeId node);

  // Time of the first generation event.
  SimTime first_at() const { return first_at_; }
  bool active(SimTime at) const { return at < stop_; }
  // Creates the transaction for a generation event at `now` and returns it;
  // next_at() is then the following event time.
  Transaction generate(SimTime now);
  SimTime next_at() const { return next_at_; }
  std::uint64_t generated() const { return counter_; }

 private:
  NodeId node_;
  SimTime period_;
  double jitter_;
  std::uint32_t payload_;
  SimTime stop_;
  SimTime first_at_;
  SimTime next_at_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace pbftsim
