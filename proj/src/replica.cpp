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

#include "pbftsim/replica.hpp"

#include <algorithm>
#include <limits>

namespace pbftsim {

BlockRef BlockStore::add(std::vector<TxId> tx_ids) {
  blocks_.push_back(std::move(tx_ids));
  return blocks_.size();  // refs start at 1; 0 is the null block
}

const std::vector<TxId>* BlockStore::find(BlockRef ref) const {
  if (ref == kNullBlockRef) return &empty_;
  if (ref > blocks_.size()) return nullptr;
  return &blocks_[ref - 1];
}

const char* to_string(TimerKind kind) {
  switch (kind) {
    case TimerKind::kRetry: return "RETRY";
    case TimerKind::kViewChange: return "VIEW_CHANGE";
    case TimerKind::kGeneration: return "GENERATION";
    case TimerKind::kMinuteTick: return "MINUTE_TICK";
  }
  return "UNKNOWN";
}

Replica::Replica(ReplicaConfig config, BlockStore& store)
    : config_(config), store_(&store), f_(fault_tolerance(config.n)), vc_timeout_(config.view_change_timeout) {
  if (config_.n == 0) throw std::invalid_argument("replica needs n >= 1");
  if (config_.me >= config_.n) throw std::invalid_argument("replica id out of range");
  if (config_.block_size == 0) throw std::invalid_argument("block size must be positive");
  last_heard_.assign(config_.n, std::numeric_limits<SimTime>::min());
}

Message Replica::make(MessageKind kind, NodeId to, SimTime now) const {
  Message m;
  m.kind = kind;
  m.sender = config_.me;
  m.recipient = to;
  m.view = view_;
  m.timestamp_ms = to_wire_millis(now);
  return m;
}

// ---------------------------------------------------------------------------
// log bookkeeping

Replica::Entry& Replica::entry_for(ViewNumber v, SequenceNumber s, SimTime now) {
  auto [it, inserted] = log_.try_emplace(Key{s, v});
  if (inserted) {
    it->second.view = v;
    it->second.seq = s;
    it->second.first_seen = now;
    it->second.order = order_counter_++;
  }
  return it->second;
}

Replica::Entry* Replica::find_entry(ViewNumber v, SequenceNumber s) {
  auto it = log_.find(Key{s, v});
  return it == log_.end() ? nullptr : &it->second;
}

const Replica::Entry* Replica::find_entry(ViewNumber v, SequenceNumber s) const {
  auto it = log_.find(Key{s, v});
  return it == log_.end() ? nullptr : &it->second;
}

Replica::Entry* Replica::latest_entry(SequenceNumber s) {
  auto it = log_.lower_bound(Key{s + 1, 0});
  if (it == log_.begin()) return nullptr;
  --it;
  return it->first.first == s ? &it->second : nullptr;
}

std::size_t Replica::matching(const std::map<NodeId, Digest>& votes, const Entry& e) const {
  if (!e.digest) return 0;
  return static_cast<std::size_t>(
      std::count_if(votes.begin(), votes.end(), [&](const auto& kv) { return kv.second == *e.digest; }));
}

std::size_t Replica::prepare_count(ViewNumber v, SequenceNumber s) const {
  const Entry* e = find_entry(v, s);
  if (!e) return 0;
  return e->digest ? matching(e->prepares, *e) : e->prepares.size();
}

std::size_t Replica::commit_count(ViewNumber v, SequenceNumber s) const {
  const Entry* e = find_entry(v, s);
  if (!e) return 0;
  return e->digest ? matching(e->commits, *e) : e->commits.size();
}

bool Replica::is_live(const Entry& e) const { return !e.applied && (e.view == view_ || e.certified); }

bool Replica::has_entry(ViewNumber v, SequenceNumber s) const { return find_entry(v, s) != nullptr; }

bool Replica::is_certified_awaiting_data(SequenceNumber s) const {
  auto it = certified_.find(s);
  if (it == certified_.end()) return false;
  const Entry* e = find_entry(it->second, s);
  if (!e || e->applied) return false;
  const auto* ids = store_->find(e->ref);
  return ids == nullptr || !data_available(*ids);
}

void Replica::enforce_out_of_order_limit(ViewNumber v) {
  auto& order = without_pre_prepare_[v];
  std::erase_if(order, [&](const Key& k) {
    auto it = log_.find(k);
    return it == log_.end() || it->second.has_pre_prepare;
  });
  while (order.size() > config_.out_of_order_limit) {
    auto it = log_.find(order.front());
    if (it != log_.end() && !it->second.has_pre_prepare && !it->second.certified) {
      log_.erase(it);
      ++counters_.buffer_evictions;
    }
    order.pop_front();
  }
}

// ---------------------------------------------------------------------------
// mempool

void Replica::reserve(const std::vector<TxId>& ids) {
  for (TxId id : ids) {
    reserved_ids_.insert(id);
    auto it = mempool_.find(id);
    if (it != mempool_.end() && !it->second.reserved) {
      it->second.reserved = true;
      unreserved_.erase({it->second.order, id});
      note_ordered(it->second.arrived);
    }
  }
}

void Replica::note_ordered(SimTime arrived) {
  newest_ordered_arrival_ = std::max(newest_ordered_arrival_.value_or(arrived), arrived);
}

void Replica::unreserve_all() {
  reserved_ids_.clear();
  for (auto& [id, p] : mempool_) {
    if (p.reserved) {
      p.reserved = false;
      unreserved_.insert({p.order, id});
    }
  }
}

bool Replica::data_available(const std::vector<TxId>& ids) const {
  return std::all_of(ids.begin(), ids.end(),
                     [&](TxId id) { return mempool_.contains(id) || committed_txs_.contains(id); });
}

std::uint64_t Replica::missing_mask(const Entry* e) const {
  constexpr std::uint64_t kAll = std::numeric_limits<std::uint64_t>::max();
  if (!e) return kAll;
  const auto* ids = store_->find(e->ref);
  if (!ids || (!e->digest && e->ref == kNullBlockRef)) return kAll;
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < ids->size(); ++i) {
    if (mempool_.contains((*ids)[i]) || committed_txs_.contains((*ids)[i])) continue;
    mask |= std::uint64_t{1} << std::min<std::size_t>(i, 63);
  }
  return mask;
}

Outbox Replica::on_transaction(const Transaction& tx, SimTime now, bool local) {
  Outbox out;
  if (mempool_.contains(tx.id) || committed_txs_.contains(tx.id)) {
    ++counters_.duplicates;
    return out;
  }
  PoolTx p{tx, order_counter_++, now, reserved_ids_.contains(tx.id)};
  if (!p.reserved) unreserved_.insert({p.order, tx.id});
  mempool_.emplace(tx.id, p);

  if (local && config_.n > 1) {
    Message m = make(MessageKind::kTxBroadcast, kBroadcast, now);
    m.tx = tx;
    m.tx_type = config_.tx_type;
    out.send(std::move(m));
  }
  assemble_all(now, out);
  if (!certified_.empty()) try_apply(now, out);
  return out;
}

std::optional<Block> Replica::try_assemble_block(SimTime now, Outbox& out) {
  if (!is_primary() || in_view_change_ || unreserved_.size() < config_.block_size) return std::nullopt;
  if (config_.window != 0 && next_seq_ - 1 >= ledger_height() + config_.window) return std::nullopt;

  Block b;
  b.tx_ids.reserve(config_.block_size);
  for (auto it = unreserved_.begin(); b.tx_ids.size() < config_.block_size; ++it) b.tx_ids.push_back(it->second);
  b.height = next_seq_++;
  b.digest = block_digest(b.height, b.tx_ids);
  b.ref = store_->add(b.tx_ids);

  if (config_.equivocate && config_.n > 2 && b.tx_ids.size() > 1) {
    std::vector<TxId> alt(b.tx_ids.rbegin(), b.tx_ids.rend());
    const Digest alt_digest = block_digest(b.height, alt);
    const BlockRef alt_ref = store_->add(alt);
    reserve(b.tx_ids);
    Entry& e = entry_for(view_, b.height, now);
    e.has_pre_prepare = true;
    e.digest = b.digest;
    e.ref = b.ref;
    for (NodeId j = 0; j < config_.n; ++j) {
      if (j == config_.me) continue;
      const bool first_half = ((j + config_.n - config_.me) % config_.n) <= (config_.n - 1) / 2;
      Message m = make(MessageKind::kPrePrepare, j, now);
      m.seq = b.height;
      m.digest = first_half ? b.digest : alt_digest;
      m.block_ref = first_half ? b.ref : alt_ref;
      out.send(std::move(m));
    }
    evaluate(e, now, out);
  } else {
    propose(b.height, b.ref, b.digest, now, out);
  }
  return b;
}

void Replica::assemble_all(SimTime now, Outbox& out) {
  while (try_assemble_block(now, out)) {
  }
}

void Replica::propose(SequenceNumber seq, BlockRef ref, const Digest& digest, SimTime now, Outbox& out) {
  if (const auto* ids = store_->find(ref)) reserve(*ids);
  Entry& e = entry_for(view_, seq, now);
  e.has_pre_prepare = true;
  e.digest = digest;
  e.ref = ref;
  Message m = make(MessageKind::kPrePrepare, kBroadcast, now);
  m.seq = seq;
  m.digest = digest;
  m.block_ref = ref;
  out.send(std::move(m));
  evaluate(e, now, out);
}

// ---------------------------------------------------------------------------
// normal case

Outbox Replica::on_message(const Message& m, SimTime now) {
  if (m.sender < config_.n) last_heard_[m.sender] = now;
  switch (m.kind) {
    case MessageKind::kTxBroadcast:
      if (!m.tx) {
        ++counters_.rejected;
        return {};
      }
      return on_transaction(*m.tx, now, false);
    case MessageKind::kPrePrepare: return on_pre_prepare(m, now);
    case MessageKind::kPrepare: return on_prepare(m, now);
    case MessageKind::kCommit: return on_commit(m, now);
    case MessageKind::kRetryRequest: return on_retry_request(m, now);
    case MessageKind::kViewChange: return on_view_change(m, now);
    case MessageKind::kNewView: return on_new_view(m, now);
    case MessageKind::kClientRequest: break;
  }
  ++counters_.rejected;
  return {};
}

bool Replica::accepts_normal(const Message& m, SimTime now, Outbox& out) {
  if (m.sender >= config_.n || !m.digest) {
    ++counters_.rejected;
    return false;
  }
  if (m.view > view_) {
    buffer_future(m, now, out);
    return false;
  }
  if (m.view < view_ || in_view_change_) return false;
  return true;
}

Outbox Replica::on_pre_prepare(const Message& m, SimTime now) {
  Outbox out;
  if (!accepts_normal(m, now, out)) return out;
  if (m.sender != primary_of(m.view)) {
    ++counters_.rejected;
    return out;
  }
  if (m.seq <= ledger_height() || m.seq <= pruned_below_) {
    ++counters_.duplicates;
    return out;
  }
  const auto* ids = store_->find(m.block_ref);
  if (!ids) {
    ++counters_.rejected;
    return out;
  }
  const Digest expected =
      m.block_ref == kNullBlockRef ? null_block_digest(m.seq) : block_digest(m.seq, *ids);
  if (expected != *m.digest) {
    ++counters_.evidence;
    return out;
  }

  Entry& e = entry_for(m.view, m.seq, now);
  if (e.has_pre_prepare) {
    if (e.digest != m.digest) {
      ++counters_.evidence;
    } else {
      ++counters_.duplicates;
    }
    return out;
  }
  e.has_pre_prepare = true;
  e.digest = m.digest;
  e.ref = m.block_ref;
  reserve(*ids);
  last_progress_at_ = std::max(last_progress_at_, now);

  if (config_.me != primary_of(m.view)) {
    Message p = make(MessageKind::kPrepare, kBroadcast, now);
    p.seq = m.seq;
    p.digest = m.digest;
    p.block_ref = m.block_ref;
    out.send(std::move(p));
    e.prepares[config_.me] = *m.digest;
    e.sent_prepare = true;
  }
  evaluate(e, now, out);
  return out;
}

Outbox Replica::on_prepare(const Message& m, SimTime now) {
  Outbox out;
  if (!accepts_normal(m, now, out)) return out;
  if (m.sender == primary_of(m.view)) {
    ++counters_.rejected;
    return out;
  }
  if (m.seq <= ledger_height() || m.seq <= pruned_below_) return out;

  Entry& e = entry_for(m.view, m.seq, now);
  if (e.prepares.contains(m.sender)) {
    ++counters_.duplicates;
    return out;
  }
  e.prepares[m.sender] = *m.digest;
  if (!e.has_pre_prepare) {
    if (!e.digest) {
      e.digest = m.digest;
      e.ref = m.block_ref;
    }
    without_pre_prepare_[m.view].push_back(Key{m.seq, m.view});
    enforce_out_of_order_limit(m.view);
    return out;
  }
  evaluate(e, now, out);
  return out;
}

Outbox Replica::on_commit(const Message& m, SimTime now) {
  Outbox out;
  if (m.sender >= config_.n || !m.digest) {
    ++counters_.rejected;
    return out;
  }
  if (m.view > view_) {
    buffer_future(m, now, out);
    return out;
  }
  // A commit certificate is final for its height regardless of view, so
  // commits from earlier views still count; this is how a lagging replica
  // catches up through retry responses.
  if (m.seq <= ledger_height() || m.seq <= pruned_below_) return out;

  Entry& e = entry_for(m.view, m.seq, now);
  if (e.commits.contains(m.sender)) {
    ++counters_.duplicates;
    return out;
  }
  e.commits[m.sender] = *m.digest;
  if (!e.has_pre_prepare && !e.digest) {
    e.digest = m.digest;
    e.ref = m.block_ref;
  }
  if (!e.has_pre_prepare && e.commits.size() == 1 && e.prepares.empty()) {
    without_pre_prepare_[m.view].push_back(Key{m.seq, m.view});
    enforce_out_of_order_limit(m.view);
    if (!find_entry(m.view, m.seq)) return out;
  }
  evaluate(*find_entry(m.view, m.seq), now, out);
  return out;
}

void Replica::evaluate(Entry& e, SimTime now, Outbox& out) {
  if (e.applied) return;
  if (!e.prepared && e.has_pre_prepare && matching(e.prepares, e) >= prepare_quorum(config_.n)) {
    e.prepared = true;
  }
  if (e.prepared && !e.sent_commit && e.view == view_ && !in_view_change_) {
    Message c = make(MessageKind::kCommit, kBroadcast, now);
    c.seq = e.seq;
    c.digest = e.digest;
    c.block_ref = e.ref;
    out.send(std::move(c));
    e.commits[config_.me] = *e.digest;
    e.sent_commit = true;
  }
  if (!e.certified && e.digest && matching(e.commits, e) >= commit_quorum(config_.n)) {
    e.certified = true;
    auto [it, inserted] = certified_.try_emplace(e.seq, e.view);
    if (!inserted && it->second != e.view) {
      const Entry* other = find_entry(it->second, e.seq);
      if (other && other->digest != e.digest) ++counters_.evidence;
      if (e.view > it->second) it->second = e.view;
    }
    try_apply(now, out);
  }
}

void Replica::try_apply(SimTime now, Outbox& out) {
  while (!certified_.empty() && certified_.begin()->first <= ledger_height()) certified_.erase(certified_.begin());
  for (;;) {
    const SequenceNumber s = ledger_height() + 1;
    auto it = certified_.find(s);
    if (it == certified_.end()) return;
    Entry* e = find_entry(it->second, s);
    if (!e) {
      certified_.erase(it);
      return;
    }
    const auto* ids = store_->find(e->ref);
    if (!ids || !data_available(*ids)) return;  // certified, awaiting data

    Block b;
    b.ref = e->ref;
    b.height = s;
    b.tx_ids = *ids;
    b.digest = *e->digest;
    for (TxId id : b.tx_ids) {
      if (committed_txs_.contains(id)) {
        ++counters_.validity_violations;
        continue;
      }
      auto pit = mempool_.find(id);
      if (!pit->second.reserved) unreserved_.erase({pit->second.order, id});
      note_ordered(pit->second.arrived);
      committed_txs_.emplace(id, pit->second.tx);
      mempool_.erase(pit);
      reserved_ids_.erase(id);
    }
    e->applied = true;
    ledger_.push_back(b);
    ledger_views_.push_back(e->view);
    out.committed.push_back(CommitRecord{std::move(b), e->view, matching(e->commits, *e)});
    certified_.erase(it);
    last_progress_at_ = now;
    vc_timeout_ = config_.view_change_timeout;
    if (config_.window != 0) assemble_all(now, out);
  }
}

// ---------------------------------------------------------------------------
// retransmission

Outbox Replica::on_retry_timer(SimTime now) {
  Outbox out;
  if (in_view_change_) {
    // Any lost fragment leaves a vote incomplete, so resend the whole vote.
    auto vit = votes_.find(vc_target_);
    if (vit != votes_.end()) {
      if (auto own = vit->second.find(config_.me); own != vit->second.end()) {
        send_vote_messages(vc_target_, own->second, now, out);
        out.retry_sent = true;
        ++counters_.retries;
      }
    }
    return out;
  }
  const SequenceNumber height = ledger_height();
  bool stalled = false;
  for (auto it = log_.lower_bound(Key{height + 1, 0}); it != log_.end(); ++it) {
    if (is_live(it->second) && it->second.first_seen <= now - config_.retry_period) {
      stalled = true;
      break;
    }
  }
  // Work is pending but no peer has been heard from for a whole period:
  // ask for retransmission.
  if (!stalled && config_.n > 1 && (!mempool_.empty() || log_.lower_bound(Key{height + 1, 0}) != log_.end())) {
    stalled = true;
    for (NodeId p = 0; p < config_.n; ++p) {
      if (p != config_.me && last_heard_[p] >= now - config_.retry_period) stalled = false;
    }
  }
  // The primary orders FIFO, so a transaction of ours is presumed lost at the
  // primary when a full block has waited here a whole period, or when one
  // that arrived a whole period later was already ordered. The origin then
  // forwards it.
  const SimTime stale = now - config_.retry_period;
  bool full_block = false;
  if (unreserved_.size() >= config_.block_size) {
    auto it = std::next(unreserved_.begin(), static_cast<std::ptrdiff_t>(config_.block_size - 1));
    full_block = mempool_.at(it->second).arrived <= stale;
  }
  auto skipped = [&](const PoolTx& p) {
    return newest_ordered_arrival_ && *newest_ordered_arrival_ >= p.arrived + config_.retry_period;
  };
  if (!stalled && !is_primary()) {
    std::size_t forwarded = 0;
    for (const auto& [order, id] : unreserved_) {
      const PoolTx& p = mempool_.at(id);
      if (p.arrived > stale || forwarded >= config_.block_size) break;
      if (tx_origin(id) != config_.me || !(full_block || skipped(p))) continue;
      Message m = make(MessageKind::kTxBroadcast, primary_of(view_), now);
      m.tx = p.tx;
      m.tx_type = config_.tx_type;
      out.send(std::move(m));
      ++forwarded;
    }
    if (forwarded > 0) {
      out.retry_sent = true;
      ++counters_.retries;
    }
    return out;
  }
  if (!stalled) return out;

  const SequenceNumber s = height + 1;
  const Entry* e = latest_entry(s);
  Message r = make(MessageKind::kRetryRequest, kBroadcast, now);
  r.seq = s;
  if (e) {
    r.view = e->view;
    r.digest = e->digest;
    r.block_ref = e->ref;
  }
  r.client_request = missing_mask(e);
  r.tx_type = (e && e->has_pre_prepare) ? 0 : 1;
  out.send(std::move(r));
  out.retry_sent = true;
  ++counters_.retries;
  return out;
}

Outbox Replica::on_retry_request(const Message& m, SimTime now) {
  Outbox out;
  const NodeId requester = m.sender;
  if (requester >= config_.n || requester == config_.me) return out;
  const SequenceNumber s = m.seq;
  const std::uint64_t mask = m.client_request;

  auto send_vote = [&](MessageKind kind, ViewNumber v, const Digest& d, BlockRef ref) {
    Message msg = make(kind, requester, now);
    msg.view = v;
    msg.seq = s;
    msg.digest = d;
    msg.block_ref = ref;
    out.send(std::move(msg));
  };
  auto send_data = [&](ViewNumber v, const std::vector<TxId>& ids) {
    if (mask == 0) return;
    const NodeId proposer = primary_of(v);
    if ((config_.me + config_.n - proposer) % config_.n > f_) return;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!(mask & (std::uint64_t{1} << std::min<std::size_t>(i, 63)))) continue;
      const Transaction* tx = nullptr;
      if (auto it = mempool_.find(ids[i]); it != mempool_.end()) tx = &it->second.tx;
      if (auto it = committed_txs_.find(ids[i]); it != committed_txs_.end()) tx = &it->second;
      if (!tx) continue;
      Message msg = make(MessageKind::kTxBroadcast, requester, now);
      msg.tx = *tx;
      msg.tx_type = config_.tx_type;
      out.send(std::move(msg));
    }
  };

  if (s >= 1 && s <= ledger_height()) {
    const Block& b = ledger_[s - 1];
    const ViewNumber v = ledger_views_[s - 1];
    send_vote(MessageKind::kCommit, v, b.digest, b.ref);
    send_data(v, b.tx_ids);
    return out;
  }
  Entry* e = latest_entry(s);
  if (!e || !e->digest) return out;
  if (config_.me == primary_of(e->view) && e->has_pre_prepare) {
    send_vote(MessageKind::kPrePrepare, e->view, *e->digest, e->ref);
  }
  if (e->sent_prepare) send_vote(MessageKind::kPrepare, e->view, *e->digest, e->ref);
  if (e->sent_commit) send_vote(MessageKind::kCommit, e->view, *e->digest, e->ref);
  if (e->has_pre_prepare) {
    if (const auto* ids = store_->find(e->ref)) send_data(e->view, *ids);
  }
  return out;
}

// ---------------------------------------------------------------------------
// view change

std::optional<SimTime> Replica::pending_since() const {
  std::optional<SimTime> since;
  for (auto it = log_.lower_bound(Key{ledger_height() + 1, 0}); it != log_.end(); ++it) {
    if (is_live(it->second)) since = std::min(since.value_or(it->second.first_seen), it->second.first_seen);
  }
  if (unreserved_.size() >= config_.block_size) {
    // A full block became available when its last transaction arrived.
    auto it = std::next(unreserved_.begin(), static_cast<std::ptrdiff_t>(config_.block_size - 1));
    const SimTime full_at = mempool_.at(it->second).arrived;
    since = std::min(since.value_or(full_at), full_at);
  }
  return since;
}

Outbox Replica::on_view_change_timer(SimTime now) {
  Outbox out;
  if (in_view_change_) {
    if (now - vc_started_at_ >= vc_timeout_) {
      vc_timeout_ *= 2;
      start_view_change(vc_target_ + 1, now, out);
    }
    return out;
  }
  const auto since = pending_since();
  if (since && now - std::max(last_progress_at_, *since) >= vc_timeout_) start_view_change(view_ + 1, now, out);
  return out;
}

void Replica::start_view_change(ViewNumber target, SimTime now, Outbox& out) {
  in_view_change_ = true;
  vc_target_ = target;
  vc_started_at_ = now;
  ++counters_.view_changes;

  // Highest-view prepared (or certified) entry per height still in the log.
  std::map<SequenceNumber, VcEntry> prepared;
  for (const auto& [key, e] : log_) {
    if (!e.digest || !(e.prepared || e.certified || e.applied)) continue;
    auto [it, inserted] = prepared.try_emplace(key.first, VcEntry{e.view, *e.digest, e.ref});
    if (!inserted && e.view > it->second.view) it->second = VcEntry{e.view, *e.digest, e.ref};
  }
  VcVote& own = votes_[target][config_.me];
  own.expected = static_cast<std::uint32_t>(prepared.size());
  own.ledger_height = ledger_height();
  own.entries = std::move(prepared);
  send_vote_messages(target, own, now, out);
  maybe_install_as_primary(target, now, out);
}

void Replica::send_vote_messages(ViewNumber target, const VcVote& vote, SimTime now, Outbox& out) const {
  auto base = [&]() {
    Message m = make(MessageKind::kViewChange, kBroadcast, now);
    m.view = target;
    m.tx_type = vote.expected;
    return m;
  };
  if (vote.entries.empty()) {
    Message m = base();
    m.client_request = vote.ledger_height;
    out.send(std::move(m));
    return;
  }
  for (const auto& [seq, ve] : vote.entries) {
    Message m = base();
    m.seq = seq;
    m.digest = ve.digest;
    m.block_ref = ve.ref;
    m.client_request = (ve.view << 32) | (vote.ledger_height & 0xFFFFFFFFULL);
    out.send(std::move(m));
  }
}
void Replica::record_vote(NodeId sender, ViewNumber target, const Message& m) {
  VcVote& v = votes_[target][sender];
  v.expected = m.tx_type;
  v.ledger_height = m.client_request & 0xFFFFFFFFULL;
  if (m.digest) v.entries[m.seq] = VcEntry{m.client_request >> 32, *m.digest, m.block_ref};
}

Outbox Replica::on_view_change(const Message& m, SimTime now) {
  Outbox out;
  if (m.sender >= config_.n || m.sender == config_.me) return out;
  if (m.view <= view_) return out;
  record_vote(m.sender, m.view, m);
  maybe_join_view_change(now, out);
  maybe_install_as_primary(m.view, now, out);
  return out;
}

void Replica::maybe_join_view_change(SimTime now, Outbox& out) {
  const ViewNumber current = in_view_change_ ? vc_target_ : view_;
  std::map<NodeId, ViewNumber> highest;
  for (auto it = votes_.upper_bound(current); it != votes_.end(); ++it) {
    for (const auto& [sender, vote] : it->second) {
      if (sender != config_.me) highest[sender] = std::max(highest[sender], it->first);
    }
  }
  if (highest.size() < f_ + 1) return;
  ViewNumber smallest = std::numeric_limits<ViewNumber>::max();
  for (const auto& [sender, v] : highest) smallest = std::min(smallest, v);
  start_view_change(smallest, now, out);
}

void Replica::maybe_install_as_primary(ViewNumber target, SimTime now, Outbox& out) {
  if (primary_of(target) != config_.me || new_view_sent_.contains(target)) return;
  if (!in_view_change_ || vc_target_ != target) return;
  auto vit = votes_.find(target);
  if (vit == votes_.end()) return;

  std::vector<const VcVote*> chosen;
  const auto own = vit->second.find(config_.me);
  if (own == vit->second.end() || !own->second.complete()) return;
  chosen.push_back(&own->second);
  for (const auto& [sender, vote] : vit->second) {
    if (chosen.size() >= commit_quorum(config_.n)) break;
    if (sender != config_.me && vote.complete()) chosen.push_back(&vote);
  }
  if (chosen.size() < commit_quorum(config_.n)) return;

  SequenceNumber low = std::numeric_limits<SequenceNumber>::max();
  for (const VcVote* v : chosen) low = std::min(low, v->ledger_height);
  low = std::max(low, pruned_below_);
  SequenceNumber high = low;
  std::map<SequenceNumber, VcEntry> reproposals;
  for (const VcVote* v : chosen) {
    for (const auto& [seq, ve] : v->entries) {
      if (seq <= low) continue;
      auto [it, inserted] = reproposals.try_emplace(seq, ve);
      if (!inserted && ve.view > it->second.view) it->second = ve;
      high = std::max(high, seq);
    }
  }

  new_view_sent_.insert(target);
  view_ = target;
  in_view_change_ = false;
  last_progress_at_ = now;
  unreserve_all();

  Message nv = make(MessageKind::kNewView, kBroadcast, now);
  nv.seq = high;
  nv.client_request = low;
  nv.tx_type = static_cast<std::uint32_t>(high - low);
  out.send(std::move(nv));

  next_seq_ = high + 1;
  for (SequenceNumber s = low + 1; s <= high; ++s) {
    auto it = reproposals.find(s);
    if (it != reproposals.end()) {
      propose(s, it->second.ref, it->second.digest, now, out);
    } else {
      propose(s, kNullBlockRef, null_block_digest(s), now, out);
    }
  }
  replay_future(target, now, out);
  assemble_all(now, out);
}

Outbox Replica::on_new_view(const Message& m, SimTime now) {
  Outbox out;
  if (m.sender != primary_of(m.view)) {
    ++counters_.rejected;
    return out;
  }
  if (m.view <= view_) return out;
  // Uncertified entries from earlier views above the new view's highest
  // re-proposal can never commit.
  const SequenceNumber high = m.seq;
  std::erase_if(log_, [&](const auto& kv) {
    return kv.first.second < m.view && kv.first.first > high && !kv.second.certified;
  });
  adopt_view(m.view, now, out);
  return out;
}

void Replica::buffer_future(const Message& m, SimTime now, Outbox& out) {
  auto& q = future_[m.view];
  q.push_back(m);
  if (q.size() > config_.out_of_order_limit) {
    q.pop_front();
    ++counters_.buffer_evictions;
  }
  auto& senders = future_senders_[m.view];
  senders.insert(m.sender);
  // f+1 distinct replicas already operating in a later view means at least
  // one correct replica installed it.
  if (senders.size() >= f_ + 1 && m.view > view_ && primary_of(m.view) != config_.me) {
    adopt_view(m.view, now, out);
  }
}

void Replica::adopt_view(ViewNumber v, SimTime now, Outbox& out) {
  view_ = v;
  in_view_change_ = false;
  vc_target_ = v;
  last_progress_at_ = now;
  unreserve_all();
  for (const auto& [key, e] : log_) {
    if (key.second == v && e.has_pre_prepare && !e.applied) {
      if (const auto* ids = store_->find(e.ref)) reserve(*ids);
    }
  }
  future_.erase(future_.begin(), future_.lower_bound(v));
  future_senders_.erase(future_senders_.begin(), future_senders_.lower_bound(v));
  votes_.erase(votes_.begin(), votes_.upper_bound(v));
  replay_future(v, now, out);
  assemble_all(now, out);
}

void Replica::replay_future(ViewNumber v, SimTime now, Outbox& out) {
  auto it = future_.find(v);
  if (it == future_.end()) return;
  std::deque<Message> pending = std::move(it->second);
  future_.erase(it);
  future_senders_.erase(v);
  for (const Message& m : pending) {
    Outbox o = on_message(m, now);
    out.messages.insert(out.messages.end(), std::make_move_iterator(o.messages.begin()),
                        std::make_move_iterator(o.messages.end()));
    out.committed.insert(out.committed.end(), std::make_move_iterator(o.committed.begin()),
                         std::make_move_iterator(o.committed.end()));
  }
}

void Replica::prune(SequenceNumber low) {
  if (low <= pruned_below_) return;
  low = std::min<SequenceNumber>(low, ledger_height());
  pruned_below_ = low;
  log_.erase(log_.begin(), log_.lower_bound(Key{low + 1, 0}));
  certified_.erase(certified_.begin(), certified_.upper_bound(low));
  for (auto it = votes_.begin(); it != votes_.end();) {
    it = it->first < view_ ? votes_.erase(it) : std::next(it);
  }
}

}  // namespace pbftsim
