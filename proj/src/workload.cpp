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

#include "pbftsim/workload.hpp"

#include <cmath>

#include "pbftsim/netsim.hpp"

namespace pbftsim {

void WorkloadConfig::validate() const {
  if (nodes == 0) throw ConfigError("nodes must be at least 1");
  if (period <= 0) throw ConfigError("generation_period must be positive");
  if (!(jitter >= 0.0 && jitter < 1.0)) throw ConfigError("jitter must be in [0, 1)");
  if (payload_bytes < Transaction::kMinPayload) {
    throw ConfigError("tx_payload_bytes must be at least " + std::to_string(Transaction::kMinPayload));
  }
}

TransactionSource::TransactionSource(const WorkloadConfig& config, NodeId node)
    : node_(node),
      period_(config.period),
      jitter_(config.jitter),
      payload_(config.payload_bytes),
      stop_(config.stop),
      rng_(derive_seed(config.seed, node, StreamPurpose::kGeneration)) {
  config.validate();
  if (node >= config.nodes) throw ContractViolation("workload node out of range");
  first_at_ = static_cast<SimTime>(std::llround(static_cast<double>(period_) * static_cast<double>(node) /
                                                static_cast<double>(config.nodes)));
  next_at_ = first_at_;
}

Transaction TransactionSource::generate(SimTime now) {
  Transaction tx;
  tx.id = make_tx_id(node_, static_cast<std::uint32_t>(counter_++));
  tx.payload_size = payload_;
  tx.created_at_ms = to_wire_millis(now);
  SimTime gap = period_;
  if (jitter_ > 0.0) {
    const double u = std::uniform_real_distribution<double>(-1.0, 1.0)(rng_);
    gap = static_cast<SimTime>(std::llround(static_cast<double>(period_) * (1.0 + jitter_ * u)));
  }
  next_at_ = now + gap;
  return tx;
}

}  // namespace pbftsim
