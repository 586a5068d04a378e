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


#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "pbftsim/metrics.hpp"
#include "pbftsim/netsim.hpp"

using namespace pbftsim;

namespace {

Frame frame_of(std::size_t bytes) { return std::make_shared<const std::vector<std::uint8_t>>(bytes, 0); }

Message protocol_message(NodeId from, NodeId to) {
  Message m;
  m.kind = MessageKind::kPrepare;
  m.sender = from;
  m.recipient = to;
  m.seq = 1;
  m.digest = null_block_digest(1);
  return m;
}

Message tx_message(NodeId from, std::uint32_t k, std::uint32_t payload = 1000) {
  Message m;
  m.kind = MessageKind::kTxBroadcast;
  m.sender = from;
  m.recipient = kBroadcast;
  m.tx = Transaction{make_tx_id(from, k), payload, 0};
  return m;
}

struct Delivery {
  NodeId node;
  Message message;
  SimTime at;
};

// Network plus the loop that feeds its events back into it.
struct Rig {
  EventQueue queue;
  std::vector<Delivery> delivered;
  std::vector<SimTime> deliver_events;
  std::unique_ptr<Network> net;

  explicit Rig(NetworkConfig cfg, Metrics* metrics = nullptr) {
    net = std::make_unique<Network>(cfg, queue, metrics,
                                    [this](NodeId n, const Message& m, SimTime t) { delivered.push_back({n, m, t}); });
  }
  std::size_t run(SimTime until) {
    return queue.run(until, [this](const SimEvent& e) {
      if (e.kind == EventKind::kDeliver) {
        deliver_events.push_back(e.at);
        net->on_deliver(e);
      } else if (e.kind == EventKind::kProcessDone) {
        net->on_process_done(e);
      }
    });
  }
};

NetworkConfig idle_config(std::size_t nodes) {
  NetworkConfig c;
  c.nodes = nodes;
  c.profile = DeviceProfile::preset("MCU8");
  c.profile.per_message_processing_s = 0.0;
  c.profile.per_byte_processing_s = 0.0;
  return c;
}

}  // namespace

TEST_CASE("event queue ordering") {
  EventQueue q;
  CHECK(q.run(100, [](const SimEvent&) {}) == 0);
  CHECK(q.now() == 100);

  EventQueue eq;
  std::vector<NodeId> order;
  for (NodeId i = 0; i < 5; ++i) eq.schedule(SimEvent{.at = 50, .node = i});
  eq.schedule(SimEvent{.at = 10, .node = 99});
  eq.run(1000, [&](const SimEvent& e) { order.push_back(e.node); });
  CHECK(order == std::vector<NodeId>{99, 0, 1, 2, 3, 4});
  CHECK_THROWS_AS(eq.schedule(SimEvent{.at = 999}), ContractViolation);
  CHECK_NOTHROW(eq.schedule(SimEvent{.at = 1000}));
}

TEST_CASE("a million random events run sorted by time then insertion") {
  EventQueue q;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000000; ++i) q.schedule(SimEvent{.at = static_cast<SimTime>(rng() % 100000)});
  SimTime last_at = -1;
  std::uint64_t last_seq = 0;
  bool sorted = true;
  const auto n = q.run(100000, [&](const SimEvent& e) {
    if (e.at < last_at || (e.at == last_at && e.seqno < last_seq)) sorted = false;
    last_at = e.at;
    last_seq = e.seqno;
  });
  CHECK(n == 1000000);
  CHECK(sorted);
  CHECK(q.empty());
}

TEST_CASE("run stops at the horizon") {
  EventQueue q;
  q.schedule(SimEvent{.at = 5});
  q.schedule(SimEvent{.at = 15});
  CHECK(q.run(10, [](const SimEvent&) {}) == 1);
  CHECK(q.now() == 10);
  CHECK(q.size() == 1);
  CHECK(q.count(EventKind::kTimer) == 1);
  CHECK(q.count(EventKind::kDeliver) == 0);
}

TEST_CASE("ingress buffer tail drop") {
  SUBCASE("four transaction frames into 4096 bytes") {
    IngressBuffer b(4096);
    int accepted = 0;
    for (int i = 0; i < 4; ++i) accepted += b.admit(frame_of(1122), i) == AdmitResult::kAccepted;
    CHECK(accepted == 3);
    CHECK(b.drop_count() == 1);
    CHECK(b.used_bytes() == 3 * 1122);
  }
  SUBCASE("an empty buffer accepts anything that fits") {
    IngressBuffer b(1122);
    CHECK(b.admit(frame_of(1122), 0) == AdmitResult::kAccepted);
  }
  SUBCASE("a full buffer drops without partial admission") {
    IngressBuffer b(2000);
    REQUIRE(b.admit(frame_of(1500), 0) == AdmitResult::kAccepted);
    CHECK(b.admit(frame_of(600), 1) == AdmitResult::kDropped);
    CHECK(b.used_bytes() == 1500);
    CHECK(b.size() == 1);
    CHECK(b.admit(frame_of(500), 2) == AdmitResult::kAccepted);
    CHECK(b.used_bytes() == 2000);
  }
  SUBCASE("FIFO order and byte accounting") {
    IngressBuffer b(10000);
    std::mt19937_64 rng(4);
    std::vector<std::size_t> sizes;
    for (int i = 0; i < 200; ++i) {
      const std::size_t s = 1 + rng() % 1200;
      if (b.admit(frame_of(s), i) == AdmitResult::kAccepted) sizes.push_back(s);
      CHECK(b.used_bytes() <= b.capacity());
      if (rng() % 3 == 0 && !b.empty()) {
        CHECK(b.pop()->size() == sizes.front());
        sizes.erase(sizes.begin());
      }
    }
    CHECK(b.max_used_bytes() <= b.capacity());
    CHECK_THROWS_AS(IngressBuffer(10).pop(), ContractViolation);
  }
}

TEST_CASE("device profiles") {
  for (const auto& name : DeviceProfile::preset_names()) CHECK_NOTHROW(DeviceProfile::preset(name).validate());
  CHECK_THROWS_AS(DeviceProfile::preset("Z80"), ConfigError);
  CHECK(DeviceProfile::preset("MCU8").link_rate_bps == 10e6);
  CHECK(DeviceProfile::preset("MCU32").link_rate_bps == 100e6);
  CHECK(DeviceProfile::preset("IMPLANT").tx_payload_bytes == 16);
  CHECK(DeviceProfile::preset("MCU8").max_frame_bytes() == 1122);
  CHECK(DeviceProfile::preset("IMPLANT").max_frame_bytes() == 154);

  DeviceProfile p = DeviceProfile::preset("MCU8");
  p.link_rate_bps = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = DeviceProfile::preset("MCU8");
  p.buffer_capacity_bytes = 1121;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = DeviceProfile::preset("MCU8");
  p.per_message_processing_s = -1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("transmission time of a protocol frame") {
  Rig rig(idle_config(2));
  const Message m = protocol_message(0, 1);
  CHECK(frame_size(m) == 154);
  CHECK(rig.net->send(0, m, 0) == 1);
  rig.run(kNanosPerSecond);
  REQUIRE(rig.deliver_events.size() == 1);
  const double expected_ns = (152.0 + 2.0) * 8.0 / 1e7 * 1e9;
  CHECK(std::abs(static_cast<double>(rig.deliver_events[0]) - expected_ns) <= 1000.0);
  // Zero handling cost: dispatch happens on arrival.
  REQUIRE(rig.delivered.size() == 1);
  CHECK(rig.delivered[0].at == rig.deliver_events[0]);
  CHECK(rig.delivered[0].message == m);
}

TEST_CASE("broadcast serializes on the sender's interface") {
  Rig rig(idle_config(25));
  CHECK(rig.net->send(3, protocol_message(3, kBroadcast), 0) == 24);
  CHECK(rig.queue.count(EventKind::kDeliver) == 24);
  rig.run(kNanosPerSecond);
  REQUIRE(rig.deliver_events.size() == 24);
  const SimTime one = rig.net->transmission_time(154);
  for (std::size_t i = 0; i < 24; ++i) CHECK(rig.deliver_events[i] == static_cast<SimTime>(i + 1) * one);
  std::set<NodeId> receivers;
  for (const auto& d : rig.delivered) receivers.insert(d.node);
  CHECK(receivers.size() == 24);
  CHECK_FALSE(receivers.contains(3));
  // Copies start with the next node id and wrap around.
  CHECK(rig.delivered.front().node == 4);
  CHECK(rig.delivered.back().node == 2);
}

TEST_CASE("interface stays busy across back-to-back sends") {
  Rig rig(idle_config(3));
  rig.net->send(0, tx_message(0, 0), 0);
  rig.net->send(0, protocol_message(0, 1), 0);
  const SimTime expected = 2 * rig.net->transmission_time(1122) + rig.net->transmission_time(154);
  CHECK(rig.net->nic_free_at(0) == expected);
  rig.run(kNanosPerSecond);
  CHECK(std::is_sorted(rig.deliver_events.begin(), rig.deliver_events.end()));
  CHECK(std::adjacent_find(rig.deliver_events.begin(), rig.deliver_events.end()) == rig.deliver_events.end());
}

TEST_CASE("busy processor drains its buffer in arrival order") {
  NetworkConfig c = idle_config(3);
  c.profile.per_message_processing_s = 0.1;
  Rig rig(c);
  for (std::uint32_t k = 0; k < 4; ++k) {
    Message m = tx_message(0, k);
    m.recipient = 2;
    rig.net->send(0, m, 0);
  }
  rig.run(10 * kNanosPerSecond);
  REQUIRE(rig.delivered.size() == 4);
  const SimTime first_arrival = rig.net->transmission_time(1122);
  for (std::uint32_t k = 0; k < 4; ++k) {
    CHECK(rig.delivered[k].message.tx->id == make_tx_id(0, k));
    CHECK(rig.delivered[k].at == first_arrival + static_cast<SimTime>(k + 1) * from_seconds(0.1));
  }
}

TEST_CASE("processing latency is added to the handling time") {
  NetworkConfig c = idle_config(2);
  c.seed = 77;
  c.profile.per_message_processing_s = 0.002;
  c.latency.dist = LatencyDist::kUniform;
  c.latency.mean_s = 0.05;
  Rig rig(c);
  // Oracle: the receiver's processing stream, reproduced independently.
  std::mt19937_64 stream(derive_seed(77, 1, StreamPurpose::kProcessing));
  const double delay = sample_processing_delay(c.latency, stream);
  const SimTime send_at = 10 * kNanosPerSecond;
  rig.run(send_at);
  rig.net->send(0, protocol_message(0, 1), send_at);
  rig.run(20 * kNanosPerSecond);
  REQUIRE(rig.delivered.size() == 1);
  const SimTime arrival = send_at + rig.net->transmission_time(154);
  CHECK(rig.delivered[0].at == arrival + from_seconds(delay + 0.002));
}

TEST_CASE("transit latency delays arrival, not the processor") {
  NetworkConfig c = idle_config(2);
  c.seed = 5;
  c.latency.dist = LatencyDist::kExponential;
  c.latency.mode = LatencyMode::kTransit;
  c.latency.mean_s = 0.5;
  Metrics metrics(2, 60 * kNanosPerSecond);
  Rig rig(c, &metrics);
  std::mt19937_64 stream(derive_seed(5, 0, StreamPurpose::kTransit));
  const double delay = sample_processing_delay(c.latency, stream);
  rig.net->send(0, protocol_message(0, 1), 0);
  rig.run(60 * kNanosPerSecond);
  REQUIRE(rig.delivered.size() == 1);
  CHECK(rig.deliver_events[0] == rig.net->transmission_time(154) + from_seconds(delay));
  CHECK(rig.delivered[0].at == rig.deliver_events[0]);
  const auto report = metrics.finalize(60 * kNanosPerSecond, {0, 0});
  CHECK(report.load_per_node[1] == doctest::Approx(0.0));
}

TEST_CASE("malformed frames are counted and skipped") {
  Rig rig(idle_config(2));
  SimEvent e;
  e.at = 0;
  e.kind = EventKind::kDeliver;
  e.node = 1;
  e.frame = frame_of(40);
  rig.queue.schedule(e);
  rig.net->send(0, protocol_message(0, 1), 0);
  rig.run(kNanosPerSecond);
  CHECK(rig.net->stats().malformed == 1);
  CHECK(rig.net->stats().processed == 1);
  CHECK(rig.delivered.size() == 1);
}

TEST_CASE("crashed nodes neither send nor receive") {
  NetworkConfig c = idle_config(3);
  c.profile.per_message_processing_s = 0.5;
  Rig rig(c);
  for (std::uint32_t k = 0; k < 3; ++k) {
    Message m = tx_message(0, k);
    m.recipient = 2;
    rig.net->send(0, m, 0);
  }
  rig.run(from_seconds(0.01));  // all three queued or processing at node 2
  rig.net->crash(2);
  CHECK(rig.net->crashed(2));
  rig.net->send(0, protocol_message(0, 2), rig.queue.now());
  CHECK(rig.net->send(2, protocol_message(2, 0), rig.queue.now()) == 0);
  rig.run(10 * kNanosPerSecond);
  CHECK(rig.delivered.empty());
  const auto& s = rig.net->stats();
  CHECK(s.discarded == 1);
  CHECK(s.purged == 3);
}

TEST_CASE("packet conservation under random traffic") {
  NetworkConfig c;
  c.nodes = 6;
  c.seed = 9;
  c.profile = DeviceProfile::preset("MCU8");
  c.profile.buffer_capacity_bytes = 4096;
  c.latency.dist = LatencyDist::kNormal;
  c.latency.mean_s = 0.01;
  Rig rig(c);
  std::mt19937_64 rng(3);
  SimTime t = 0;
  for (int i = 0; i < 400; ++i) {
    t += static_cast<SimTime>(rng() % 50000000);
    rig.run(t);
    const NodeId from = rng() % 6;
    if (i == 200) rig.net->crash(5);
    Message m = (rng() & 1) ? tx_message(from, static_cast<std::uint32_t>(i)) : protocol_message(from, kBroadcast);
    if (rng() % 4 == 0) m.recipient = (from + 1 + rng() % 5) % 6;
    rig.net->send(from, m, t);
    const auto& s = rig.net->stats();
    CHECK(s.sent == s.admitted + s.dropped + s.discarded + rig.queue.count(EventKind::kDeliver));
  }
  rig.run(t + 3600 * kNanosPerSecond);
  const auto& s = rig.net->stats();
  CHECK(s.dropped > 0);
  CHECK(s.sent == s.admitted + s.dropped + s.discarded);
  CHECK(s.admitted == s.processed + s.malformed + s.purged);
  CHECK(s.processed == rig.delivered.size());
}

TEST_CASE("random streams") {
  std::set<std::uint64_t> seeds;
  for (NodeId n = 0; n < 30; ++n) {
    for (auto p : {StreamPurpose::kProcessing, StreamPurpose::kGeneration, StreamPurpose::kTransit}) {
      seeds.insert(derive_seed(42, n, p));
    }
  }
  CHECK(seeds.size() == 90);
  CHECK(derive_seed(1, 0, StreamPurpose::kProcessing) != derive_seed(2, 0, StreamPurpose::kProcessing));
  CHECK(derive_seed(1, 3, StreamPurpose::kGeneration) == derive_seed(1, 3, StreamPurpose::kGeneration));
  CHECK(mix64(0) != 0);
}

TEST_CASE("latency model parsing and validation") {
  for (auto d : {LatencyDist::kNone, LatencyDist::kUniform, LatencyDist::kNormal, LatencyDist::kExponential}) {
    CHECK(parse_latency_dist(to_string(d)) == d);
  }
  CHECK(parse_latency_mode("transit") == LatencyMode::kTransit);
  CHECK_THROWS_AS(parse_latency_dist("pareto"), ConfigError);
  CHECK_THROWS_AS(parse_latency_mode("wire"), ConfigError);
  LatencyModel m;
  m.dist = LatencyDist::kUniform;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.mean_s = -1;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("sampler oracles") {
  constexpr int kDraws = 100000;
  std::mt19937_64 rng(2024);
  LatencyModel none;
  for (int i = 0; i < 100; ++i) CHECK(sample_processing_delay(none, rng) == 0.0);

  for (double mean : {0.05, 1.0, 2.0}) {
    for (auto dist : {LatencyDist::kUniform, LatencyDist::kNormal, LatencyDist::kExponential}) {
      LatencyModel m;
      m.dist = dist;
      m.mean_s = mean;
      double sum = 0;
      int below_mean = 0;
      double lo = 1e300, hi = -1e300;
      for (int i = 0; i < kDraws; ++i) {
        const double x = sample_processing_delay(m, rng);
        sum += x;
        below_mean += x <= mean;
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      INFO(to_string(dist) << " mean " << mean);
      CHECK(lo >= 0.0);
      // Truncating the normal at zero shifts its mean by about 0.0038 sigma.
      CHECK(std::abs(sum / kDraws - mean) <= 0.02 * mean);
      if (dist == LatencyDist::kUniform) CHECK(hi <= 2 * mean);
      if (dist == LatencyDist::kExponential) {
        const double cdf = static_cast<double>(below_mean) / kDraws;
        CHECK(std::abs(cdf - (1.0 - std::exp(-1.0))) <= 0.01 * (1.0 - std::exp(-1.0)));
      }
    }
  }
}
