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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbftsim {

using NodeId = std::uint64_t;
using ViewNumber = std::uint64_t;
using SequenceNumber = std::uint64_t;
using TxId = std::uint64_t;
using BlockRef = std::uint64_t;

inline constexpr NodeId kBroadcast = 0xFFFFFFFFULL;
inline constexpr BlockRef kNullBlockRef = 0;

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidBlockError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;

  std::string hex() const;
};

// Transaction identity is (origin, per-origin counter) packed into 64 bits.
constexpr TxId make_tx_id(NodeId origin, std::uint32_t counter) {
  return (origin << 32) | counter;
}
constexpr NodeId tx_origin(TxId id) { return id >> 32; }

// The first 12 payload bytes carry the id and creation stamp on the wire, so
// payloads shorter than kMinPayload cannot be encoded.
struct Transaction {
  static constexpr std::uint32_t kMinPayload = 12;

  TxId id = 0;
  std::uint32_t payload_size = 1000;
  std::uint32_t created_at_ms = 0;

  NodeId origin() const { return tx_origin(id); }
  friend bool operator==(const Transaction&, const Transaction&) = default;
};

struct Block {
  BlockRef ref = kNullBlockRef;
  SequenceNumber height = 0;
  std::vector<TxId> tx_ids;
  Digest digest;

  bool is_null() const { return ref == kNullBlockRef; }
  friend bool operator==(const Block&, const Block&) = default;
};

enum class MessageKind : std::uint8_t {
  kTxBroadcast = 1,
  kClientRequest = 2,
  kPrePrepare = 3,
  kPrepare = 4,
  kCommit = 5,
  kRetryRequest = 6,
  kViewChange = 7,
  kNewView = 8,
};

const char* to_string(MessageKind kind);

// One uniform packet layout is used for every message kind; handlers read
// the fields they need and ignore the rest. `tx` and `digest` are mutually
// exclusive.
struct Message {
  MessageKind kind = MessageKind::kPrepare;
  NodeId sender = 0;
  NodeId recipient = kBroadcast;
  ViewNumber view = 0;
  SequenceNumber seq = 0;
  std::optional<Digest> digest;
  std::optional<Transaction> tx;
  BlockRef block_ref = 0;
  std::uint32_t timestamp_ms = 0;
  std::uint64_t client_request = 0;
  std::uint32_t tx_type = 0;

  bool well_formed() const { return !(tx && digest); }
  friend bool operator==(const Message&, const Message&) = default;
};

struct QuorumParams {
  std::size_t n = 1;
  std::size_t f = 0;
};

constexpr std::size_t fault_tolerance(std::size_t n) { return n == 0 ? 0 : (n - 1) / 3; }
constexpr std::size_t prepare_quorum(std::size_t n) { return 2 * fault_tolerance(n); }
constexpr std::size_t commit_quorum(std::size_t n) { return 2 * fault_tolerance(n) + 1; }
constexpr QuorumParams quorum_params(std::size_t n) { return {n, fault_tolerance(n)}; }

// Field sizes of the data packet, in packet order.
namespace wire {
inline constexpr std::size_t kSenderId = 4;
inline constexpr std::size_t kRecipientId = 4;
inline constexpr std::size_t kSignature = 64;
inline constexpr std::size_t kTransactionType = 4;
inline constexpr std::size_t kBlock = 8;
inline constexpr std::size_t kTimestamp = 4;
inline constexpr std::size_t kNodeId = 8;
inline constexpr std::size_t kViewNumber = 8;
inline constexpr std::size_t kMessageHash = 32;
inline constexpr std::size_t kClientRequest = 8;
inline constexpr std::size_t kRequestNumber = 8;

inline constexpr std::size_t kFixedBody = kSenderId + kRecipientId + kSignature + kTransactionType +
                                          kBlock + kTimestamp + kNodeId + kViewNumber +
                                          kClientRequest + kRequestNumber;
static_assert(kFixedBody == 120);

// kind tag + presence flags, prepended to the packet body.
inline constexpr std::size_t kHeader = 2;

inline constexpr std::uint8_t kFlagTx = 0x01;
inline constexpr std::uint8_t kFlagDigest = 0x02;
}  // namespace wire

// Size of the packet body (without the 2-byte header).
std::size_t wire_size(const Message& m);
inline std::size_t frame_size(const Message& m) { return wire_size(m) + wire::kHeader; }

std::vector<std::uint8_t> encode(const Message& m);
Message decode(std::span<const std::uint8_t> frame);

Digest block_digest(SequenceNumber height, std::span<const TxId> tx_ids);
// Digest used for gap-filling null blocks installed by a new view.
Digest null_block_digest(SequenceNumber height);

std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(const std::string& hex);

}  // namespace pbftsim
