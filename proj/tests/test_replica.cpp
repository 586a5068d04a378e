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
#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "doctest.h"
#include "pbftsim/replica.hpp"

using namespace pbftsim;

namespace {

constexpr SimTime kSec = kNanosPerSecond;

ReplicaConfig cfg(NodeId me, std::size_t n, std::size_t b = 5) {
  ReplicaConfig c;
  c.me = me;
  c.n = n;
  c.block_size = b;
  return c;
}

Transaction tx(NodeId origin, std::uint32_t k) { return Transaction{make_tx_id(origin, k), 1000, 0}; }

std::size_t count_kind(const Outbox& out, MessageKind kind) {
  return static_cast<std::size_t>(std::count_if(out.messages.begin(), out.messages.end(),
                                                [&](const Message& m) { return m.kind == kind; }));
}

const Message* first_of(const Outbox& out, MessageKind kind) {
  for (const auto& m : out.messages) {
    if (m.kind == kind) return &m;
  }
  return nullptr;
}

// Synchronous router: broadcasts fan out to every other replica, delivery
// is FIFO and instantaneous; `drop` filters individual copies.
struct Harness {
  BlockStore store;
  std::vector<std::unique_ptr<Replica>> nodes;
  std::vector<bool> dead;
  std::vector<std::vector<CommitRecord>> commits;
  std::deque<std::pair<NodeId, Message>> wire;
  std::function<bool(NodeId to, const Message&)> drop;

  Harness(std::size_t n, std::size_t b) : dead(n, false), commits(n) {
    for (NodeId i = 0; i < n; ++i) nodes.push_back(std::make_unique<Replica>(cfg(i, n, b), store));
  }
  Replica& at(NodeId i) { return *nodes[i]; }
  void post(NodeId from, Outbox out) {
    for (auto& c : out.committed) commits[from].push_back(c);
    for (auto& m : out.messages) {
      if (m.recipient == kBroadcast) {
        for (NodeId j = 0; j < nodes.size(); ++j) {
          if (j != from) wire.emplace_back(j, m);
        }
      } else {
        wire.emplace_back(m.recipient, m);
      }
    }
  }
  void run(SimTime now) {
    while (!wire.empty()) {
      auto [to, m] = wire.front();
      wire.pop_front();
      if (dead[to] || dead[m.sender]) continue;
      if (drop && drop(to, m)) continue;
      post(to, nodes[to]->on_message(m, now));
    }
  }
  void submit(NodeId origin, std::uint32_t k, SimTime now) { post(origin, at(origin).on_transaction(tx(origin, k), now, true)); }
};

}  // namespace

TEST_CASE("block store") {
  BlockStore s;
  CHECK(s.find(kNullBlockRef) != nullptr);
  CHECK(s.find(kNullBlockRef)->empty());
  CHECK(s.find(1) == nullptr);
  const BlockRef r = s.add({1, 2, 3});
  CHECK(r != kNullBlockRef);
  REQUIRE(s.find(r) != nullptr);
  CHECK(*s.find(r) == std::vector<TxId>{1, 2, 3});
  CHECK(s.add({4}) != r);
}

TEST_CASE("replica construction rejects bad parameters") {
  BlockStore s;
  CHECK_THROWS_AS(Replica(cfg(0, 0), s), std::invalid_argument);
  CHECK_THROWS_AS(Replica(cfg(4, 4), s), std::invalid_argument);
  CHECK_THROWS_AS(Replica(cfg(0, 4, 0), s), std::invalid_argument);
}

TEST_CASE("transactions") {
  BlockStore s;
  SUBCASE("a locally generated transaction is broadcast once") {
    Replica r(cfg(2, 4), s);
    const Outbox out = r.on_transaction(tx(2, 0), 0, true);
    REQUIRE(out.messages.size() == 1);
    CHECK(out.messages[0].kind == MessageKind::kTxBroadcast);
    CHECK(out.messages[0].recipient == kBroadcast);
    CHECK(out.messages[0].tx == tx(2, 0));
    CHECK(r.mempool_size() == 1);
  }
  SUBCASE("a received transaction at the primary only grows the mempool") {
    Replica r(cfg(0, 4), s);
    const Outbox out = r.on_transaction(tx(1, 0), 0, false);
    CHECK(out.messages.empty());
    CHECK(r.mempool_size() == 1);
  }
  SUBCASE("duplicates change nothing") {
    Replica r(cfg(1, 4), s);
    r.on_transaction(tx(3, 0), 0, false);
    const Outbox out = r.on_transaction(tx(3, 0), kSec, false);
    CHECK(out.messages.empty());
    CHECK(r.mempool_size() == 1);
    CHECK(r.counters().duplicates == 1);
  }
}

TEST_CASE("block assembly at the primary") {
  BlockStore s;
  Replica p(cfg(0, 4, 5), s);
  SUBCASE("below the block size nothing is proposed") {
    for (std::uint32_t k = 0; k < 4; ++k) CHECK(p.on_transaction(tx(1, k), 0, false).messages.empty());
    Outbox out;
    CHECK_FALSE(p.try_assemble_block(0, out).has_value());
    CHECK(out.messages.empty());
  }
  SUBCASE("seven transactions give one block of the five oldest") {
    Outbox all;
    for (std::uint32_t k = 0; k < 7; ++k) {
      Outbox o = p.on_transaction(tx(1, k), k, false);
      all.messages.insert(all.messages.end(), o.messages.begin(), o.messages.end());
    }
    REQUIRE(count_kind(all, MessageKind::kPrePrepare) == 1);
    const Message* pp = first_of(all, MessageKind::kPrePrepare);
    CHECK(pp->seq == 1);
    const auto* ids = s.find(pp->block_ref);
    REQUIRE(ids != nullptr);
    std::vector<TxId> expected;
    for (std::uint32_t k = 0; k < 5; ++k) expected.push_back(make_tx_id(1, k));
    CHECK(*ids == expected);
    CHECK(*pp->digest == block_digest(1, expected));
    CHECK(p.unreserved_size() == 2);
  }
  SUBCASE("ten transactions give consecutive heights") {
    std::vector<SequenceNumber> seqs;
    for (std::uint32_t k = 0; k < 10; ++k) {
      for (const auto& m : p.on_transaction(tx(2, k), 0, false).messages) {
        if (m.kind == MessageKind::kPrePrepare) seqs.push_back(m.seq);
      }
    }
    CHECK(seqs == std::vector<SequenceNumber>{1, 2});
    CHECK(p.next_seq() == 3);
    CHECK(p.unreserved_size() == 0);
  }
  SUBCASE("backups never propose") {
    Replica b(cfg(1, 4, 5), s);
    for (std::uint32_t k = 0; k < 10; ++k) CHECK(count_kind(b.on_transaction(tx(2, k), 0, false), MessageKind::kPrePrepare) == 0);
  }
}

namespace {

// Backup 1 of a 4-node network holding five transactions and the matching
// PRE-PREPARE for height 1.
struct BackupFixture {
  BlockStore store;
  std::size_t n;
  Replica backup;
  std::vector<TxId> ids;
  BlockRef ref = 0;
  Message pre_prepare;

  explicit BackupFixture(std::size_t nodes = 4) : n(nodes), backup(cfg(1, nodes, 5), store) {
    for (std::uint32_t k = 0; k < 5; ++k) {
      backup.on_transaction(tx(0, k), 0, false);
      ids.push_back(make_tx_id(0, k));
    }
    ref = store.add(ids);
    pre_prepare.kind = MessageKind::kPrePrepare;
    pre_prepare.sender = 0;
    pre_prepare.view = 0;
    pre_prepare.seq = 1;
    pre_prepare.block_ref = ref;
    pre_prepare.digest = block_digest(1, ids);
  }
  Message vote(MessageKind kind, NodeId from) const {
    Message m = pre_prepare;
    m.kind = kind;
    m.sender = from;
    return m;
  }
};

}  // namespace

TEST_CASE("pre-prepare handling") {
  BackupFixture fx;
  SUBCASE("a valid pre-prepare is answered with one broadcast prepare") {
    const Outbox out = fx.backup.on_pre_prepare(fx.pre_prepare, kSec);
    REQUIRE(out.messages.size() == 1);
    CHECK(out.messages[0].kind == MessageKind::kPrepare);
    CHECK(out.messages[0].recipient == kBroadcast);
    CHECK(out.messages[0].digest == fx.pre_prepare.digest);
  }
  SUBCASE("a pre-prepare from a non-primary is rejected") {
    Message m = fx.pre_prepare;
    m.sender = 2;
    CHECK(fx.backup.on_pre_prepare(m, kSec).messages.empty());
    CHECK(fx.backup.counters().rejected == 1);
  }
  SUBCASE("a conflicting pre-prepare for the same slot is evidence") {
    fx.backup.on_pre_prepare(fx.pre_prepare, kSec);
    std::vector<TxId> other(fx.ids.rbegin(), fx.ids.rend());
    Message m = fx.pre_prepare;
    m.block_ref = fx.store.add(other);
    m.digest = block_digest(1, other);
    CHECK(fx.backup.on_pre_prepare(m, kSec).messages.empty());
    CHECK(fx.backup.counters().evidence == 1);
  }
  SUBCASE("a digest that does not match the block is evidence") {
    Message m = fx.pre_prepare;
    m.digest = null_block_digest(1);
    CHECK(fx.backup.on_pre_prepare(m, kSec).messages.empty());
    CHECK(fx.backup.counters().evidence == 1);
  }
}

TEST_CASE("prepare and commit quorums") {
  SUBCASE("n=4: the second distinct prepare triggers the commit") {
    BackupFixture fx;
    fx.backup.on_pre_prepare(fx.pre_prepare, kSec);
    CHECK(fx.backup.prepare_count(0, 1) == 1);
    const Outbox out = fx.backup.on_prepare(fx.vote(MessageKind::kPrepare, 2), kSec);
    CHECK(count_kind(out, MessageKind::kCommit) == 1);
    CHECK(fx.backup.prepare_count(0, 1) == 2);
  }
  SUBCASE("a repeated prepare does not count twice") {
    BackupFixture fx(7);  // prepare quorum 4
    fx.backup.on_pre_prepare(fx.pre_prepare, kSec);
    fx.backup.on_prepare(fx.vote(MessageKind::kPrepare, 2), kSec);
    const Outbox again = fx.backup.on_prepare(fx.vote(MessageKind::kPrepare, 2), kSec);
    CHECK(again.messages.empty());
    CHECK(fx.backup.prepare_count(0, 1) == 2);
    CHECK(fx.backup.counters().duplicates == 1);
  }
  SUBCASE("a prepare before the pre-prepare is held without output") {
    BackupFixture fx;
    const Outbox out = fx.backup.on_prepare(fx.vote(MessageKind::kPrepare, 2), kSec);
    CHECK(out.messages.empty());
    CHECK(fx.backup.has_entry(0, 1));
    const Outbox after = fx.backup.on_pre_prepare(fx.pre_prepare, kSec);
    CHECK(count_kind(after, MessageKind::kPrepare) == 1);
    CHECK(count_kind(after, MessageKind::kCommit) == 1);
  }
  SUBCASE("n=4: the third distinct commit commits the block") {
    BackupFixture fx;
    fx.backup.on_pre_prepare(fx.pre_prepare, kSec);
    fx.backup.on_prepare(fx.vote(MessageKind::kPrepare, 2), kSec);  // own commit sent
    CHECK(fx.backup.on_commit(fx.vote(MessageKind::kCommit, 2), kSec).committed.empty());
    const Outbox out = fx.backup.on_commit(fx.vote(MessageKind::kCommit, 3), 2 * kSec);
    REQUIRE(out.committed.size() == 1);
    CHECK(out.committed[0].block.height == 1);
    CHECK(out.committed[0].block.tx_ids == fx.ids);
    CHECK(out.committed[0].certificate == 3);
    CHECK(fx.backup.ledger_height() == 1);
    CHECK(fx.backup.mempool_size() == 0);
    SUBCASE("later commits for the same slot are no-ops") {
      const Outbox again = fx.backup.on_commit(fx.vote(MessageKind::kCommit, 0), 3 * kSec);
      CHECK(again.committed.empty());
      CHECK(again.messages.empty());
      CHECK(fx.backup.ledger_height() == 1);
    }
  }
  SUBCASE("n=25: the seventeenth distinct commit commits") {
    BackupFixture fx(25);
    fx.backup.on_pre_prepare(fx.pre_prepare, kSec);
    for (NodeId j = 2; j < 2 + 15; ++j) fx.backup.on_prepare(fx.vote(MessageKind::kPrepare, j), kSec);
    // 16 prepares including its own: prepared, own commit sent.
    std::size_t commits = 1;
    for (NodeId j = 2; j < 25 && fx.backup.ledger_height() == 0; ++j) {
      const Outbox out = fx.backup.on_commit(fx.vote(MessageKind::kCommit, j), kSec);
      ++commits;
      if (!out.committed.empty()) break;
    }
    CHECK(commits == 17);
    CHECK(fx.backup.ledger_height() == 1);
  }
  SUBCASE("certified without the transactions waits for data") {
    BlockStore store;
    Replica r(cfg(1, 4, 5), store);
    std::vector<TxId> ids;
    for (std::uint32_t k = 0; k < 5; ++k) ids.push_back(make_tx_id(2, k));
    Message c;
    c.kind = MessageKind::kCommit;
    c.seq = 1;
    c.block_ref = store.add(ids);
    c.digest = block_digest(1, ids);
    for (NodeId j : {0, 2, 3}) {
      c.sender = j;
      r.on_commit(c, kSec);
    }
    CHECK(r.is_certified_awaiting_data(1));
    CHECK(r.ledger_height() == 0);
    Outbox last;
    for (std::uint32_t k = 0; k < 5; ++k) last = r.on_transaction(tx(2, k), 2 * kSec, false);
    REQUIRE(last.committed.size() == 1);
    CHECK(r.ledger_height() == 1);
  }
}

TEST_CASE("retry timer") {
  BackupFixture fx;
  SUBCASE("no outstanding work sends nothing") {
    Replica idle(cfg(2, 4, 5), fx.store);
    CHECK(idle.on_retry_timer(100 * kSec).messages.empty());
    CHECK(idle.counters().retries == 0);
  }
  SUBCASE("a stalled slot triggers exactly one retry request") {
    fx.backup.on_message(fx.pre_prepare, kSec);
    fx.backup.on_message(fx.vote(MessageKind::kPrepare, 2), 4 * kSec);
    CHECK(fx.backup.on_retry_timer(5 * kSec).messages.empty());  // not yet stale
    const Outbox out = fx.backup.on_retry_timer(11 * kSec);
    REQUIRE(out.messages.size() == 1);
    CHECK(out.messages[0].kind == MessageKind::kRetryRequest);
    CHECK(out.messages[0].recipient == kBroadcast);
    CHECK(out.messages[0].seq == 1);
    CHECK(out.retry_sent);
    CHECK(fx.backup.counters().retries == 1);
  }
  SUBCASE("pending work while every peer is silent triggers a retry request") {
    Replica r(cfg(1, 4, 5), fx.store);
    auto deliver = [&](NodeId from, SimTime at) {
      Message m;
      m.kind = MessageKind::kTxBroadcast;
      m.sender = from;
      m.tx = tx(from, 0);
      r.on_message(m, at);
    };
    r.on_transaction(tx(1, 0), 0, true);
    CHECK(r.on_retry_timer(10 * kSec).retry_sent);  // nobody heard yet
    deliver(2, 12 * kSec);
    CHECK_FALSE(r.on_retry_timer(20 * kSec).retry_sent);
    CHECK(r.on_retry_timer(40 * kSec).retry_sent);
  }
  SUBCASE("peers answer a retry request with their votes") {
    Harness h(4, 5);
    for (std::uint32_t k = 0; k < 5; ++k) h.submit(0, k, 0);
    h.drop = [](NodeId to, const Message& m) { return to == 3 && m.kind == MessageKind::kCommit; };
    h.run(0);
    CHECK(h.at(3).ledger_height() == 0);
    CHECK(h.at(1).ledger_height() == 1);
    h.drop = nullptr;
    h.post(3, h.at(3).on_retry_timer(20 * kSec));
    h.run(20 * kSec);
    CHECK(h.at(3).ledger_height() == 1);
    CHECK(h.at(3).ledger()[0] == h.at(1).ledger()[0]);
  }
}

TEST_CASE("view change timer") {
  BackupFixture fx;
  fx.backup.on_pre_prepare(fx.pre_prepare, kSec);
  SUBCASE("progress within the timeout re-arms without messages") {
    CHECK(fx.backup.on_view_change_timer(20 * kSec).messages.empty());
    CHECK_FALSE(fx.backup.in_view_change());
  }
  SUBCASE("a timeout starts a view change and escalates with a doubled timeout") {
    const Outbox out = fx.backup.on_view_change_timer(31 * kSec);
    REQUIRE(count_kind(out, MessageKind::kViewChange) >= 1);
    CHECK(first_of(out, MessageKind::kViewChange)->view == 1);
    CHECK(fx.backup.in_view_change());
    CHECK(fx.backup.view_change_target() == 1);
    CHECK(fx.backup.on_view_change_timer(40 * kSec).messages.empty());
    const Outbox esc = fx.backup.on_view_change_timer(61 * kSec);
    REQUIRE(count_kind(esc, MessageKind::kViewChange) >= 1);
    CHECK(fx.backup.view_change_target() == 2);
    CHECK(fx.backup.current_view_change_timeout() == 60 * kSec);
  }
  SUBCASE("an idle replica never times out") {
    Replica idle(cfg(3, 4, 5), fx.store);
    CHECK(idle.on_view_change_timer(1000 * kSec).messages.empty());
  }
}

TEST_CASE("view change protocol") {
  Harness h(4, 1);
  h.submit(0, 0, 0);
  // Commits are lost, so every backup is prepared but nobody commits.
  h.drop = [](NodeId, const Message& m) { return m.kind == MessageKind::kCommit; };
  h.run(0);
  for (NodeId i = 1; i < 4; ++i) CHECK(h.at(i).ledger_height() == 0);
  const Digest original = block_digest(1, std::vector<TxId>{make_tx_id(0, 0)});
  h.drop = nullptr;
  h.dead[0] = true;

  SUBCASE("stale and foreign messages are ignored") {
    Message vc;
    vc.kind = MessageKind::kViewChange;
    vc.sender = 2;
    vc.view = 0;
    CHECK(h.at(1).on_view_change(vc, kSec).messages.empty());
    Message nv;
    nv.kind = MessageKind::kNewView;
    nv.sender = 3;  // not the primary of view 1
    nv.view = 1;
    CHECK(h.at(2).on_new_view(nv, kSec).messages.empty());
    CHECK(h.at(2).counters().rejected == 1);
    CHECK(h.at(2).view() == 0);
  }

  SUBCASE("the new primary collects a quorum and re-proposes the prepared block") {
    std::size_t vc_messages = 0;
    for (NodeId i = 1; i < 4; ++i) {
      Outbox out = h.at(i).on_view_change_timer(31 * kSec);
      vc_messages += count_kind(out, MessageKind::kViewChange);
      h.post(i, std::move(out));
    }
    CHECK(vc_messages == 3);
    // Node 1 is primary of view 1; deliver until quiescent.
    h.run(31 * kSec);
    for (NodeId i = 1; i < 4; ++i) {
      INFO("node " << i);
      CHECK(h.at(i).view() == 1);
      REQUIRE(h.at(i).ledger_height() == 1);
      CHECK(h.at(i).ledger()[0].digest == original);
      CHECK(h.at(i).ledger()[0].tx_ids == std::vector<TxId>{make_tx_id(0, 0)});
    }
    // And the new view keeps ordering fresh work.
    h.submit(2, 0, 40 * kSec);
    h.run(40 * kSec);
    for (NodeId i = 1; i < 4; ++i) CHECK(h.at(i).ledger_height() == 2);
  }
}

TEST_CASE("lockstep network agrees on one ledger") {
  Harness h(7, 3);
  for (std::uint32_t k = 0; k < 10; ++k) {
    for (NodeId i = 0; i < 7; ++i) h.submit(i, k, k * kSec);
    h.run(k * kSec);
  }
  const auto height = h.at(0).ledger_height();
  CHECK(height == 70 / 3);
  for (NodeId i = 1; i < 7; ++i) CHECK(h.at(i).ledger() == h.at(0).ledger());
  for (const auto& c : h.commits[0]) CHECK(c.certificate >= commit_quorum(7));
  for (SequenceNumber s = 0; s < height; ++s) CHECK(h.at(0).ledger()[s].height == s + 1);
}

TEST_CASE("an equivocating primary cannot split the ledger") {
  Harness h(4, 2);
  ReplicaConfig c = cfg(0, 4, 2);
  c.equivocate = true;
  h.nodes[0] = std::make_unique<Replica>(c, h.store);
  for (std::uint32_t k = 0; k < 4; ++k) {
    h.submit(1, k, 0);
    h.run(0);
  }
  // At most one digest per height can gather a commit quorum.
  for (NodeId i = 1; i < 4; ++i) {
    for (NodeId j = i + 1; j < 4; ++j) {
      const auto& a = h.at(i).ledger();
      const auto& b = h.at(j).ledger();
      for (std::size_t s = 0; s < std::min(a.size(), b.size()); ++s) CHECK(a[s] == b[s]);
    }
  }
  // Backups split 1/2 between the two proposals, so neither reaches a quorum.
  CHECK(h.at(1).ledger_height() + h.at(2).ledger_height() + h.at(3).ledger_height() == 0);
}
