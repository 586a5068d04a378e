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
#include <functional>
#include <memory>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbftsim/protocol.hpp"
#include "pbftsim/replica.hpp"
#include "pbftsim/sim_time.hpp"

namespace pbftsim {

class Metrics;

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// random streams

// splitmix64 finalizer; the basis for every derived seed.
std::uint64_t mix64(std::uint64_t x);

// One independent stream per (run seed, node, purpose). Streams never share
// state, so adding a consumer on one stream cannot perturb another.
enum class StreamPurpose : std::uint64_t { kProcessing = 1, kGeneration = 2, kTransit = 3 };
std::uint64_t derive_seed(std::uint64_t run_seed, NodeId node, StreamPurpose purpose);

// ---------------------------------------------------------------------------
// device and latency models

struct DeviceProfile {
  std::string name = "MCU8";
  double link_rate_bps = 10e6;
  double per_message_processing_s = 0.001;
  // Handling cost that scales with packet length (hashing and signature
  // checking over the received bytes).
  double per_byte_processing_s = 0.0;
  std::size_t buffer_capacity_bytes = 1 << 20;
  std::uint32_t tx_payload_bytes = 1000;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // Largest frame this profile can put on the wire.
  std::size_t max_frame_bytes() const;

  static DeviceProfile preset(const std::string& name);
  static std::vector<std::string> preset_names();
};

enum class LatencyDist : std::uint8_t { kNone, kUniform, kNormal, kExponential };

const char* to_string(LatencyDist d);
LatencyDist parse_latency_dist(const std::string& s);

// Where the sampled latency is spent. PROCESSING: the receiving processor
// is busy for it, so delays queue behind each other. TRANSIT: the copy is
// held in flight before it reaches the receiver's buffer, occupying neither
// processor nor NIC.
enum class LatencyMode : std::uint8_t { kProcessing, kTransit };

const char* to_string(LatencyMode m);
LatencyMode parse_latency_mode(const std::string& s);

struct LatencyModel {
  LatencyDist dist = LatencyDist::kNone;
  LatencyMode mode = LatencyMode::kProcessing;
  double mean_s = 0.0;
  // Normal: sigma = mean * normal_sigma_ratio, truncated at 0 by resampling.
  double normal_sigma_ratio = 1.0 / 3.0;

  void validate() const;
};

// Seconds of artificial latency for one message.
// NONE: 0. UNIFORM: U[0, 2*mean]. NORMAL: N(mean, sigma) resampled until
// non-negative. EXPONENTIAL: Exp with the given mean.
double sample_processing_delay(const LatencyModel& model, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// event queue

enum class EventKind : std::uint8_t { kDeliver, kProcessDone, kTimer, kGenerate, kCrash };

const char* to_string(EventKind k);

using Frame = std::shared_ptr<const std::vector<std::uint8_t>>;

struct SimEvent {
  SimTime at = 0;
  std::uint64_t seqno = 0;
  EventKind kind = EventKind::kTimer;
  NodeId node = 0;
  TimerKind timer = TimerKind::kRetry;
  Frame frame;
};

// Min-heap on (at, seqno). seqno is assigned at schedule time, so events at
// equal times run in insertion order.
class EventQueue {
 public:
  std::uint64_t schedule(SimEvent e);
  // Executes events with at <= until in order; returns the number executed.
  std::size_t run(SimTime until, const std::function<void(const SimEvent&)>& handler);

  SimTime now() const { return now_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  // Pending events of one kind (used for end-of-run accounting).
  std::size_t count(EventKind kind) const;

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.at != b.at ? a.at > b.at : a.seqno > b.seqno;
    }
  };
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
  std::uint64_t next_seqno_ = 0;
  SimTime now_ = 0;
};

// ---------------------------------------------------------------------------
// ingress buffer

enum class AdmitResult : std::uint8_t { kAccepted, kDropped };

// Finite receive queue of a network interface with tail drop.
class IngressBuffer {
 public:
  explicit IngressBuffer(std::size_t capacity_bytes) : capacity_(capacity_bytes) {}

  AdmitResult admit(Frame packet, SimTime arrival);
  bool empty() const { return queue_.empty(); }
  std::size_t size() const { return queue_.size(); }
  // Removes the oldest packet and releases its bytes.
  Frame pop();
  void clear();

  std::size_t used_bytes() const { return used_; }
  std::size_t max_used_bytes() const { return max_used_; }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t drop_count() const { return drops_; }

 private:
  struct Item {
    Frame packet;
    SimTime arrival;
  };
  std::deque<Item> queue_;
  std::size_t capacity_;
  std::size_t used_ = 0;
  std::size_t max_used_ = 0;
  std::uint64_t drops_ = 0;
};

// ---------------------------------------------------------------------------
// network

struct NetworkConfig {
  std::size_t nodes = 1;
  DeviceProfile profile;
  LatencyModel latency;
  SimTime propagation = 0;
  std::uint64_t seed = 1;
};

struct NetworkStats {
  std::uint64_t sent = 0;       // packet copies put on the wire
  std::uint64_t admitted = 0;   // accepted into an ingress buffer
  std::uint64_t dropped = 0;    // tail-dropped at a full buffer
  std::uint64_t discarded = 0;  // arrived at a crashed node
  std::uint64_t purged = 0;     // admitted, then lost when the node crashed
  std::uint64_t processed = 0;  // handed to the replica
  std::uint64_t malformed = 0;  // failed to decode
};

// Full-mesh network of identical devices. Each node has one NIC that
// serializes outgoing copies FIFO at the link rate, and one processor that
// takes packets FIFO from the ingress buffer, stays busy for the fixed and
// per-byte handling cost (plus the sampled latency in PROCESSING mode), then
// hands the decoded message to `dispatch`.
class Network {
 public:
  using Dispatch = std::function<void(NodeId, const Message&, SimTime)>;

  Network(NetworkConfig config, EventQueue& queue, Metrics* metrics, Dispatch dispatch);

  // Schedules one DELIVER per recipient; returns how many were scheduled.
  std::size_t send(NodeId from, const Message& m, SimTime now);
  void on_deliver(const SimEvent& e);
  void on_process_done(const SimEvent& e);
  void crash(NodeId node);

  bool crashed(NodeId node) const { return nodes_[node].crashed; }
  const IngressBuffer& buffer(NodeId node) const { return nodes_[node].ingress; }
  SimTime nic_free_at(NodeId node) const { return nodes_[node].nic_free_at; }
  const NetworkStats& stats() const { return stats_; }
  const NetworkConfig& config() const { return config_; }
  SimTime transmission_time(std::size_t frame_bytes) const;

 private:
  struct Node {
    IngressBuffer ingress;
    std::mt19937_64 rng;
    std::mt19937_64 transit_rng;
    SimTime nic_free_at = 0;
    bool cpu_busy = false;
    bool crashed = false;
  };

  void start_next(NodeId node, SimTime now);

  NetworkConfig config_;
  EventQueue* queue_;
  Metrics* metrics_;
  Dispatch dispatch_;
  std::vector<Node> nodes_;
  NetworkStats stats_;
};

}  // namespace pbftsim
