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
#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pbftsim/protocol.hpp"
#include "pbftsim/sim_time.hpp"

namespace pbftsim {

// Block bodies by reference. The packet only has room for an 8-byte block
// reference, so the ordered transaction list a proposer chose is published
// here and looked up by receivers of the PRE-PREPARE. Append-only; one
// store per simulation run.
class BlockStore {
 public:
  BlockRef add(std::vector<TxId> tx_ids);
  // nullptr for unknown refs; kNullBlockRef maps to an empty list.
  const std::vector<TxId>* find(BlockRef ref) const;
  std::size_t size() const { return blocks_.size(); }

 private:
  std::vector<std::vector<TxId>> blocks_;
  std::vector<TxId> empty_;
};

enum class TimerKind : std::uint8_t { kRetry, kViewChange, kGeneration, kMinuteTick };

const char* to_string(TimerKind kind);

struct ReplicaConfig {
  NodeId me = 0;
  std::size_t n = 1;
  std::size_t block_size = 5;
  SimTime retry_period = 10 * kNanosPerSecond;
  SimTime view_change_timeout = 30 * kNanosPerSecond;
  // Entries without a PRE-PREPARE kept per view, and future-view messages
  // kept per view.
  std::size_t out_of_order_limit = 64;
  // Watermark window: blocks a primary may have proposed but not yet
  // committed locally. 0 means unbounded.
  std::size_t window = 0;
  // Byzantine injector: the primary proposes two different blocks for the
  // same sequence number, one to each half of the backups.
  bool equivocate = false;
  std::uint32_t tx_type = 1;
};

struct ReplicaCounters {
  std::uint64_t duplicates = 0;
  std::uint64_t rejected = 0;
  std::uint64_t evidence = 0;
  std::uint64_t retries = 0;
  std::uint64_t view_changes = 0;
  std::uint64_t validity_violations = 0;
  std::uint64_t buffer_evictions = 0;
};

// A block appended to the local ledger, with the commit certificate size it
// was applied under.
struct CommitRecord {
  Block block;
  ViewNumber view = 0;
  std::size_t certificate = 0;
};

struct Outbox {
  std::vector<Message> messages;  // recipient is a node or kBroadcast
  std::vector<CommitRecord> committed;
  bool retry_sent = false;

  void send(Message m) { messages.push_back(std::move(m)); }
};

// The PBFT replica state machine. Every node is both a transaction source
// and a replica: transactions are broadcast by their origin, the primary of
// the current view orders them into blocks of block_size, and blocks go
// through PRE-PREPARE / PREPARE / COMMIT. Handlers are deterministic and
// only produce messages; delivery is the caller's job.
class Replica {
 public:
  Replica(ReplicaConfig config, BlockStore& store);

  const ReplicaConfig& config() const { return config_; }
  NodeId id() const { return config_.me; }
  ViewNumber view() const { return view_; }
  bool in_view_change() const { return in_view_change_; }
  ViewNumber view_change_target() const { return vc_target_; }
  SimTime current_view_change_timeout() const { return vc_timeout_; }
  NodeId primary_of(ViewNumber v) const { return v % config_.n; }
  bool is_primary() const { return primary_of(view_) == config_.me; }
  SequenceNumber next_seq() const { return next_seq_; }
  SequenceNumber ledger_height() const { return ledger_.size(); }
  const std::vector<Block>& ledger() const { return ledger_; }
  std::size_t mempool_size() const { return mempool_.size(); }
  std::size_t unreserved_size() const { return unreserved_.size(); }
  SimTime last_progress_at() const { return last_progress_at_; }
  const ReplicaCounters& counters() const { return counters_; }

  // Vote counts recorded for an entry (matching its digest once known).
  std::size_t prepare_count(ViewNumber v, SequenceNumber s) const;
  std::size_t commit_count(ViewNumber v, SequenceNumber s) const;
  bool has_entry(ViewNumber v, SequenceNumber s) const;
  bool is_certified_awaiting_data(SequenceNumber s) const;

  // `local` marks a transaction generated by this node, which is then
  // broadcast to every replica.
  Outbox on_transaction(const Transaction& tx, SimTime now, bool local);
  // Assembles at most one block from the oldest unreserved transactions.
  std::optional<Block> try_assemble_block(SimTime now, Outbox& out);

  Outbox on_message(const Message& m, SimTime now);
  Outbox on_pre_prepare(const Message& m, SimTime now);
  Outbox on_prepare(const Message& m, SimTime now);
  Outbox on_commit(const Message& m, SimTime now);
  Outbox on_retry_request(const Message& m, SimTime now);
  Outbox on_view_change(const Message& m, SimTime now);
  Outbox on_new_view(const Message& m, SimTime now);

  Outbox on_retry_timer(SimTime now);
  Outbox on_view_change_timer(SimTime now);

  // Drops log state at or below a height every live replica has committed.
  void prune(SequenceNumber low);

 private:
  struct Entry {
    ViewNumber view = 0;
    SequenceNumber seq = 0;
    std::optional<Digest> digest;
    BlockRef ref = kNullBlockRef;
    bool has_pre_prepare = false;
    std::map<NodeId, Digest> prepares;
    std::map<NodeId, Digest> commits;
    bool sent_prepare = false;
    bool sent_commit = false;
    bool prepared = false;
    bool certified = false;
    bool applied = false;
    SimTime first_seen = 0;
    std::uint64_t order = 0;
  };
  // Ordered by sequence number first so per-height lookups are range scans.
  using Key = std::pair<SequenceNumber, ViewNumber>;

  struct VcEntry {
    ViewNumber view = 0;
    Digest digest;
    BlockRef ref = kNullBlockRef;
  };
  struct VcVote {
    std::uint32_t expected = 0;
    SequenceNumber ledger_height = 0;
    std::map<SequenceNumber, VcEntry> entries;
    bool complete() const { return entries.size() == expected; }
  };

  struct PoolTx {
    Transaction tx;
    std::uint64_t order = 0;
    SimTime arrived = 0;
    bool reserved = false;
  };

  std::size_t f() const { return f_; }
  Message make(MessageKind kind, NodeId to, SimTime now) const;

  Entry& entry_for(ViewNumber v, SequenceNumber s, SimTime now);
  Entry* find_entry(ViewNumber v, SequenceNumber s);
  const Entry* find_entry(ViewNumber v, SequenceNumber s) const;
  // Highest-view entry logged for a sequence number.
  Entry* latest_entry(SequenceNumber s);
  std::size_t matching(const std::map<NodeId, Digest>& votes, const Entry& e) const;
  // Unapplied and still able to commit: current view, or already certified.
  bool is_live(const Entry& e) const;
  void enforce_out_of_order_limit(ViewNumber v);

  void evaluate(Entry& e, SimTime now, Outbox& out);
  void try_apply(SimTime now, Outbox& out);
  bool data_available(const std::vector<TxId>& ids) const;
  std::uint64_t missing_mask(const Entry* e) const;

  void reserve(const std::vector<TxId>& ids);
  void note_ordered(SimTime arrived);
  void unreserve_all();
  void assemble_all(SimTime now, Outbox& out);
  void propose(SequenceNumber seq, BlockRef ref, const Digest& digest, SimTime now, Outbox& out);

  bool accepts_normal(const Message& m, SimTime now, Outbox& out);
  void buffer_future(const Message& m, SimTime now, Outbox& out);
  void adopt_view(ViewNumber v, SimTime now, Outbox& out);
  void replay_future(ViewNumber v, SimTime now, Outbox& out);

  void start_view_change(ViewNumber target, SimTime now, Outbox& out);
  void send_vote_messages(ViewNumber target, const VcVote& vote, SimTime now, Outbox& out) const;
  void record_vote(NodeId sender, ViewNumber target, const Message& m);
  void maybe_join_view_change(SimTime now, Outbox& out);
  void maybe_install_as_primary(ViewNumber target, SimTime now, Outbox& out);
  // When the oldest outstanding work (a live log entry, or a full block of
  // unordered transactions) appeared; nullopt if there is none.
  std::optional<SimTime> pending_since() const;

  ReplicaConfig config_;
  BlockStore* store_;
  std::size_t f_;

  ViewNumber view_ = 0;
  bool in_view_change_ = false;
  ViewNumber vc_target_ = 0;
  SimTime vc_started_at_ = 0;
  SimTime vc_timeout_;
  SequenceNumber next_seq_ = 1;
  SequenceNumber pruned_below_ = 0;
  SimTime last_progress_at_ = 0;
  std::uint64_t order_counter_ = 0;
  // Local arrival time of the newest transaction seen in a block.
  std::optional<SimTime> newest_ordered_arrival_;
  // Last time a message from each node was processed.
  std::vector<SimTime> last_heard_;

  std::map<Key, Entry> log_;
  std::map<SequenceNumber, ViewNumber> certified_;
  std::vector<Block> ledger_;
  std::vector<ViewNumber> ledger_views_;

  std::unordered_map<TxId, PoolTx> mempool_;
  std::set<std::pair<std::uint64_t, TxId>> unreserved_;
  std::unordered_map<TxId, Transaction> committed_txs_;
  std::unordered_set<TxId> reserved_ids_;

  std::map<ViewNumber, std::map<NodeId, VcVote>> votes_;
  std::set<ViewNumber> new_view_sent_;
  std::map<ViewNumber, std::deque<Message>> future_;
  std::map<ViewNumber, std::set<NodeId>> future_senders_;
  std::map<ViewNumber, std::deque<Key>> without_pre_prepare_;

  ReplicaCounters counters_;
};

}  // namespace pbftsim
