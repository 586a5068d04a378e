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

#include "pbftsim/netsim.hpp"

#include <algorithm>
#include <cmath>

#include "pbftsim/metrics.hpp"

namespace pbftsim {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t run_seed, NodeId node, StreamPurpose purpose) {
  return mix64(mix64(mix64(run_seed) ^ node) ^ static_cast<std::uint64_t>(purpose));
}

// ---------------------------------------------------------------------------

void DeviceProfile::validate() const {
  if (!(link_rate_bps > 0.0) || !std::isfinite(link_rate_bps)) {
    throw ConfigError("link_rate_bps must be positive");
  }
  if (!(per_message_processing_s >= 0.0) || !std::isfinite(per_message_processing_s)) {
    throw ConfigError("per_message_processing_s must be non-negative");
  }
  if (!(per_byte_processing_s >= 0.0) || !std::isfinite(per_byte_processing_s)) {
    throw ConfigError("per_byte_processing_s must be non-negative");
  }
  if (tx_payload_bytes < Transaction::kMinPayload) {
    throw ConfigError("tx_payload_bytes must be at least " + std::to_string(Transaction::kMinPayload));
  }
  if (buffer_capacity_bytes < max_frame_bytes()) {
    throw ConfigError("buffer_capacity_bytes must hold at least one frame of " +
                      std::to_string(max_frame_bytes()) + " bytes");
  }
}

std::size_t DeviceProfile::max_frame_bytes() const {
  const std::size_t protocol = wire::kHeader + wire::kFixedBody + wire::kMessageHash;
  const std::size_t tx = wire::kHeader + wire::kFixedBody + tx_payload_bytes;
  return std::max(protocol, tx);
}

DeviceProfile DeviceProfile::preset(const std::string& name) {
  // Handling costs are calibration constants: a fixed part per message plus
  // a part per received byte, standing in for signature checks on
  // microcontrollers without crypto acceleration.
  DeviceProfile p;
  p.name = name;
  if (name == "MCU8") {
    p.link_rate_bps = 10e6;
    p.per_message_processing_s = 0.0246;
    p.per_byte_processing_s = 74.4e-6;
    p.buffer_capacity_bytes = 1 << 20;
    p.tx_payload_bytes = 1000;
  } else if (name == "MCU32") {
    p.link_rate_bps = 100e6;
    p.per_message_processing_s = 0.00246;
    p.per_byte_processing_s = 7.44e-6;
    p.buffer_capacity_bytes = 1 << 20;
    p.tx_payload_bytes = 1000;
  } else if (name == "IMPLANT") {
    p.link_rate_bps = 10e6;
    p.per_message_processing_s = 0.0246;
    p.per_byte_processing_s = 74.4e-6;
    p.buffer_capacity_bytes = 1 << 20;
    p.tx_payload_bytes = 16;
  } else {
    throw ConfigError("unknown device profile '" + name + "'");
  }
  return p;
}

std::vector<std::string> DeviceProfile::preset_names() { return {"MCU8", "MCU32", "IMPLANT"}; }

const char* to_string(LatencyDist d) {
  switch (d) {
    case LatencyDist::kNone: return "none";
    case LatencyDist::kUniform: return "uniform";
    case LatencyDist::kNormal: return "normal";
    case LatencyDist::kExponential: return "exponential";
  }
  return "none";
}

LatencyDist parse_latency_dist(const std::string& s) {
  if (s == "none") return LatencyDist::kNone;
  if (s == "uniform") return LatencyDist::kUniform;
  if (s == "normal") return LatencyDist::kNormal;
  if (s == "exponential") return LatencyDist::kExponential;
  throw ConfigError("unknown latency distribution '" + s + "'");
}

const char* to_string(LatencyMode m) { return m == LatencyMode::kTransit ? "transit" : "processing"; }

LatencyMode parse_latency_mode(const std::string& s) {
  if (s == "processing") return LatencyMode::kProcessing;
  if (s == "transit") return LatencyMode::kTransit;
  throw ConfigError("unknown latency mode '" + s + "'");
}

void LatencyModel::validate() const {
  if (!(mean_s >= 0.0) || !std::isfinite(mean_s)) throw ConfigError("latency_mean_s must be non-negative");
  if (!(normal_sigma_ratio > 0.0)) throw ConfigError("normal sigma ratio must be positive");
  if (dist != LatencyDist::kNone && mean_s == 0.0) {
    throw ConfigError("latency_mean_s must be positive for a latency distribution");
  }
}

double sample_processing_delay(const LatencyModel& model, std::mt19937_64& rng) {
  switch (model.dist) {
    case LatencyDist::kNone: return 0.0;
    case LatencyDist::kUniform: return std::uniform_real_distribution<double>(0.0, 2.0 * model.mean_s)(rng);
    case LatencyDist::kNormal: {
      std::normal_distribution<double> d(model.mean_s, model.mean_s * model.normal_sigma_ratio);
      for (;;) {
        const double x = d(rng);
        if (x >= 0.0) return x;
      }
    }
    case LatencyDist::kExponential: return std::exponential_distribution<double>(1.0 / model.mean_s)(rng);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::kDeliver: return "DELIVER";
    case EventKind::kProcessDone: return "PROCESS";
    case EventKind::kTimer: return "TIMER";
    case EventKind::kGenerate: return "GENERATE";
    case EventKind::kCrash: return "CRASH";
  }
  return "UNKNOWN";
}

std::uint64_t EventQueue::schedule(SimEvent e) {
  if (e.at < now_) {
    throw ContractViolation("event scheduled at " + std::to_string(e.at) + " ns, before now " +
                            std::to_string(now_) + " ns");
  }
  e.seqno = next_seqno_++;
  const auto id = e.seqno;
  heap_.push(std::move(e));
  return id;
}

std::size_t EventQueue::run(SimTime until, const std::function<void(const SimEvent&)>& handler) {
  std::size_t executed = 0;
  while (!heap_.empty() && heap_.top().at <= until) {
    SimEvent e = heap_.top();
    heap_.pop();
    now_ = e.at;
    handler(e);
    ++executed;
  }
  if (until > now_) now_ = until;
  return executed;
}

std::size_t EventQueue::count(EventKind kind) const {
  // priority_queue hides its container; copy once, this is end-of-run only.
  auto copy = heap_;
  std::size_t c = 0;
  while (!copy.empty()) {
    if (copy.top().kind == kind) ++c;
    copy.pop();
  }
  return c;
}

// ---------------------------------------------------------------------------

AdmitResult IngressBuffer::admit(Frame packet, SimTime arrival) {
  const std::size_t bytes = packet->size();
  if (used_ + bytes > capacity_) {
    ++drops_;
    return AdmitResult::kDropped;
  }
  used_ += bytes;
  max_used_ = std::max(max_used_, used_);
  queue_.push_back(Item{std::move(packet), arrival});
  return AdmitResult::kAccepted;
}

Frame IngressBuffer::pop() {
  if (queue_.empty()) throw ContractViolation("pop from empty ingress buffer");
  Frame p = std::move(queue_.front().packet);
  queue_.pop_front();
  used_ -= p->size();
  return p;
}

void IngressBuffer::clear() {
  queue_.clear();
  used_ = 0;
}

// ---------------------------------------------------------------------------

Network::Network(NetworkConfig config, EventQueue& queue, Metrics* metrics, Dispatch dispatch)
    : config_(std::move(config)), queue_(&queue), metrics_(metrics), dispatch_(std::move(dispatch)) {
  config_.profile.validate();
  config_.latency.validate();
  if (config_.nodes == 0) throw ConfigError("nodes must be at least 1");
  nodes_.reserve(config_.nodes);
  for (NodeId i = 0; i < config_.nodes; ++i) {
    nodes_.push_back(Node{IngressBuffer(config_.profile.buffer_capacity_bytes),
                          std::mt19937_64(derive_seed(config_.seed, i, StreamPurpose::kProcessing)),
                          std::mt19937_64(derive_seed(config_.seed, i, StreamPurpose::kTransit))});
  }
}

SimTime Network::transmission_time(std::size_t frame_bytes) const {
  return static_cast<SimTime>(
      std::llround(static_cast<double>(frame_bytes) * 8.0 * 1e9 / config_.profile.link_rate_bps));
}

std::size_t Network::send(NodeId from, const Message& m, SimTime now) {
  if (from >= nodes_.size()) throw ContractViolation("send from unknown node");
  Node& src = nodes_[from];
  if (src.crashed) return 0;
  auto frame = std::make_shared<const std::vector<std::uint8_t>>(encode(m));
  const SimTime tx_time = transmission_time(frame->size());
  const bool transit = config_.latency.mode == LatencyMode::kTransit;

  auto send_one = [&](NodeId to) {
    const SimTime start = std::max(now, src.nic_free_at);
    const SimTime end = start + tx_time;
    src.nic_free_at = end;
    if (metrics_) metrics_->record_busy(from, start, end, BusySource::kNic);
    SimEvent e;
    e.at = end + config_.propagation;
    if (transit) e.at += from_seconds(sample_processing_delay(config_.latency, src.transit_rng));
    e.kind = EventKind::kDeliver;
    e.node = to;
    e.frame = frame;
    queue_->schedule(std::move(e));
    ++stats_.sent;
  };

  if (m.recipient == kBroadcast) {
    // Rotate the copy order so no destination is systematically served first.
    const std::size_t n = nodes_.size();
    for (std::size_t k = 1; k < n; ++k) send_one((from + k) % n);
    return n - 1;
  }
  if (m.recipient >= nodes_.size()) throw ContractViolation("send to unknown node");
  if (m.recipient == from) throw ContractViolation("send to self");
  send_one(m.recipient);
  return 1;
}

void Network::on_deliver(const SimEvent& e) {
  Node& dst = nodes_[e.node];
  if (dst.crashed) {
    ++stats_.discarded;
    return;
  }
  if (dst.ingress.admit(e.frame, e.at) == AdmitResult::kDropped) {
    ++stats_.dropped;
    if (metrics_) metrics_->record_drop(e.node);
    return;
  }
  ++stats_.admitted;
  if (!dst.cpu_busy) start_next(e.node, e.at);
}

void Network::start_next(NodeId node, SimTime now) {
  Node& n = nodes_[node];
  if (n.ingress.empty()) {
    n.cpu_busy = false;
    return;
  }
  Frame frame = n.ingress.pop();
  const double latency =
      config_.latency.mode == LatencyMode::kProcessing ? sample_processing_delay(config_.latency, n.rng) : 0.0;
  const double seconds = latency + config_.profile.per_message_processing_s +
                         config_.profile.per_byte_processing_s * static_cast<double>(frame->size());
  const SimTime end = now + from_seconds(seconds);
  n.cpu_busy = true;
  if (metrics_ && end > now) metrics_->record_busy(node, now, end, BusySource::kCpu);
  SimEvent e;
  e.at = end;
  e.kind = EventKind::kProcessDone;
  e.node = node;
  e.frame = std::move(frame);
  queue_->schedule(std::move(e));
}

void Network::on_process_done(const SimEvent& e) {
  Node& n = nodes_[e.node];
  if (n.crashed) {
    ++stats_.purged;
    return;
  }
  std::optional<Message> m;
  try {
    m = decode(*e.frame);
  } catch (const FrameError&) {
    ++stats_.malformed;
  }
  if (m) {
    ++stats_.processed;
    dispatch_(e.node, *m, e.at);
  }
  start_next(e.node, e.at);
}

void Network::crash(NodeId node) {
  Node& n = nodes_[node];
  if (n.crashed) return;
  n.crashed = true;
  stats_.purged += n.ingress.size();
  n.ingress.clear();
  n.cpu_busy = false;
}

}  // namespace pbftsim
