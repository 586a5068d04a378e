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

#include "pbftsim/scenario.hpp"

#include <algorithm>

namespace pbftsim {

namespace {

void fnv_mix(std::uint64_t& h, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= 0x100000001B3ULL;
  }
}

const char* detail_of(const SimEvent& e) {
  if (e.kind == EventKind::kTimer) return to_string(e.timer);
  if (e.frame && !e.frame->empty()) return to_string(static_cast<MessageKind>((*e.frame)[0]));
  return "-";
}

}  // namespace

Simulation::Simulation(const ScenarioConfig& config, std::ostream* trace)
    : config_(config),
      duration_(from_seconds(config.duration_s)),
      stop_generation_(from_seconds(config.generation_stop_s.value_or(config.duration_s))),
      retry_period_(from_seconds(config.retry_period_s)),
      metrics_((config.validate(), config.nodes), from_seconds(config.duration_s)),
      crashed_(config.nodes, 0),
      trace_out_(trace) {
  const std::size_t n = config_.nodes;
  NetworkConfig net;
  net.nodes = n;
  net.profile = config_.profile;
  net.latency = config_.latency;
  net.propagation = from_seconds(config_.propagation_s);
  net.seed = config_.seed;
  network_ = std::make_unique<Network>(net, queue_, &metrics_,
                                       [this](NodeId node, const Message& m, SimTime now) { dispatch(node, m, now); });

  WorkloadConfig wl;
  wl.nodes = n;
  wl.period = from_seconds(config_.generation_period_s);
  wl.jitter = config_.jitter;
  wl.payload_bytes = config_.profile.tx_payload_bytes;
  wl.stop = stop_generation_;
  wl.seed = config_.seed;

  for (NodeId i = 0; i < n; ++i) {
    ReplicaConfig rc;
    rc.me = i;
    rc.n = n;
    rc.block_size = config_.block_size;
    rc.retry_period = retry_period_;
    rc.view_change_timeout = from_seconds(config_.view_change_timeout_s);
    rc.window = config_.window;
    rc.equivocate = std::find(config_.equivocators.begin(), config_.equivocators.end(), i) != config_.equivocators.end();
    replicas_.push_back(std::make_unique<Replica>(rc, store_));
    sources_.emplace_back(wl, i);
  }

  // Crashes first, so a crash at t=0 precedes everything else at t=0.
  for (const auto& c : config_.crashes) {
    SimEvent e;
    e.at = from_seconds(c.at_s);
    e.kind = EventKind::kCrash;
    e.node = c.node;
    queue_.schedule(e);
  }
  for (NodeId i = 0; i < n; ++i) {
    if (sources_[i].first_at() < stop_generation_) {
      SimEvent e;
      e.at = sources_[i].first_at();
      e.kind = EventKind::kGenerate;
      e.node = i;
      queue_.schedule(e);
    }
    schedule_timer(i, TimerKind::kRetry, retry_period_);
    schedule_timer(i, TimerKind::kViewChange, kViewChangeCheckPeriod);
  }
}

void Simulation::schedule_timer(NodeId node, TimerKind kind, SimTime at) {
  if (at > duration_) return;
  SimEvent e;
  e.at = at;
  e.kind = EventKind::kTimer;
  e.node = node;
  e.timer = kind;
  queue_.schedule(e);
}

NodeId Simulation::observer() const {
  for (NodeId i = 0; i < crashed_.size(); ++i) {
    if (!crashed_[i]) return i;
  }
  return crashed_.size();
}

void Simulation::run_until(SimTime until) {
  if (finished_) throw ContractViolation("simulation already finished");
  queue_.run(std::min(until, duration_), [this](const SimEvent& e) { handle(e); });
}

MetricsReport Simulation::finish() {
  run_until(duration_);
  finished_ = true;
  MetricsReport r = metrics_.finalize(queue_.now(), crashed_);
  r.seed = config_.seed;
  for (const auto& rep : replicas_) r.ledger_heights.push_back(rep->ledger_height());
  for (NodeId i = 0; i < replicas_.size(); ++i) {
    if (crashed_[i]) continue;
    r.view_changes = std::max(r.view_changes, replicas_[i]->counters().view_changes);
    r.final_view = std::max(r.final_view, replicas_[i]->view());
  }
  r.messages_sent = network_->stats().sent;
  r.trace_hash = trace_hash_;
  r.config = config_.echo();
  return r;
}

void Simulation::trace(const SimEvent& e) {
  const std::uint64_t size = e.frame ? e.frame->size() : 0;
  const std::uint64_t detail = e.kind == EventKind::kTimer ? static_cast<std::uint64_t>(e.timer)
                               : (e.frame && !e.frame->empty()) ? (*e.frame)[0]
                                                                : 0;
  fnv_mix(trace_hash_, static_cast<std::uint64_t>(e.at), 8);
  fnv_mix(trace_hash_, static_cast<std::uint64_t>(e.kind), 1);
  fnv_mix(trace_hash_, e.node, 8);
  fnv_mix(trace_hash_, size, 8);
  fnv_mix(trace_hash_, detail, 1);
  if (trace_out_) {
    *trace_out_ << e.at << ',' << to_string(e.kind) << ',' << e.node << ',' << size << ',' << detail_of(e) << '\n';
  }
}

void Simulation::handle(const SimEvent& e) {
  trace(e);
  ++events_;
  const SimTime now = e.at;
  switch (e.kind) {
    case EventKind::kCrash:
      network_->crash(e.node);
      crashed_[e.node] = 1;
      break;
    case EventKind::kGenerate: {
      if (crashed_[e.node]) break;
      auto& src = sources_[e.node];
      const Transaction tx = src.generate(now);
      apply(e.node, replicas_[e.node]->on_transaction(tx, now, true), now);
      if (src.next_at() < stop_generation_) {
        SimEvent next;
        next.at = src.next_at();
        next.kind = EventKind::kGenerate;
        next.node = e.node;
        queue_.schedule(next);
      }
      break;
    }
    case EventKind::kTimer:
      if (crashed_[e.node]) break;
      if (e.timer == TimerKind::kRetry) {
        apply(e.node, replicas_[e.node]->on_retry_timer(now), now);
        schedule_timer(e.node, TimerKind::kRetry, now + retry_period_);
      } else if (e.timer == TimerKind::kViewChange) {
        apply(e.node, replicas_[e.node]->on_view_change_timer(now), now);
        schedule_timer(e.node, TimerKind::kViewChange, now + kViewChangeCheckPeriod);
      }
      break;
    case EventKind::kDeliver:
      network_->on_deliver(e);
      break;
    case EventKind::kProcessDone:
      network_->on_process_done(e);
      break;
  }
  metrics_.advance(now);
}

void Simulation::dispatch(NodeId node, const Message& m, SimTime now) {
  apply(node, replicas_[node]->on_message(m, now), now);
}

void Simulation::apply(NodeId node, Outbox&& out, SimTime now) {
  if (crashed_[node]) return;
  for (const auto& m : out.messages) network_->send(node, m, now);
  const NodeId obs = observer();
  for (const auto& c : out.committed) {
    ++commits_applied_;
    min_certificate_ = std::min(min_certificate_, c.certificate);
    if (node == obs) metrics_.record_commit(now, c.block.height);
  }
  if (out.retry_sent) metrics_.record_retry(node);
  if (node == obs && !out.committed.empty()) {
    const SequenceNumber h = replicas_[obs]->ledger_height();
    if (h >= last_prune_ + kPruneEvery) {
      last_prune_ = h;
      SequenceNumber low = h;
      for (NodeId i = 0; i < replicas_.size(); ++i) {
        if (!crashed_[i]) low = std::min(low, replicas_[i]->ledger_height());
      }
      for (NodeId i = 0; i < replicas_.size(); ++i) {
        if (!crashed_[i]) replicas_[i]->prune(low);
      }
    }
  }
}

MetricsReport run_scenario(const ScenarioConfig& config, std::ostream* trace) {
  Simulation sim(config, trace);
  return sim.finish();
}

}  // namespace pbftsim
