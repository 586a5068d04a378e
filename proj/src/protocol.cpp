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

#include "pbftsim/protocol.hpp"

#include <openssl/sha.h>

#include <cstring>

namespace pbftsim {

namespace {

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  template <typename T>
  void put(T value, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i) {
      out_.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
    }
  }
  void zeros(std::size_t count) { out_.insert(out_.end(), count, 0); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t get(std::size_t width) {
    need(width);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t width) {
    need(width);
    auto s = in_.subspan(pos_, width);
    pos_ += width;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t width) const {
    if (in_.size() - pos_ < width) throw FrameError("truncated frame");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

bool valid_kind(std::uint8_t k) {
  return k >= static_cast<std::uint8_t>(MessageKind::kTxBroadcast) &&
         k <= static_cast<std::uint8_t>(MessageKind::kNewView);
}

}  // namespace

std::string Digest::hex() const { return to_hex(bytes); }

const char* to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kTxBroadcast: return "TX-BROADCAST";
    case MessageKind::kClientRequest: return "CLIENT-REQUEST";
    case MessageKind::kPrePrepare: return "PRE-PREPARE";
    case MessageKind::kPrepare: return "PREPARE";
    case MessageKind::kCommit: return "COMMIT";
    case MessageKind::kRetryRequest: return "RETRY-REQUEST";
    case MessageKind::kViewChange: return "VIEW-CHANGE";
    case MessageKind::kNewView: return "NEW-VIEW";
  }
  return "UNKNOWN";
}

std::size_t wire_size(const Message& m) {
  if (!m.well_formed()) throw EncodingError("message carries both a transaction and a hash");
  std::size_t size = wire::kFixedBody;
  if (m.tx) size += m.tx->payload_size;
  if (m.digest) size += wire::kMessageHash;
  return size;
}

std::vector<std::uint8_t> encode(const Message& m) {
  const std::size_t body = wire_size(m);
  if (m.tx && m.tx->payload_size < Transaction::kMinPayload) {
    throw EncodingError("transaction payload shorter than " + std::to_string(Transaction::kMinPayload) +
                        " bytes");
  }
  Writer w(body + wire::kHeader);
  std::uint8_t flags = 0;
  if (m.tx) flags |= wire::kFlagTx;
  if (m.digest) flags |= wire::kFlagDigest;
  w.put(static_cast<std::uint8_t>(m.kind), 1);
  w.put(flags, 1);

  w.put(static_cast<std::uint32_t>(m.sender), wire::kSenderId);
  w.put(static_cast<std::uint32_t>(m.recipient), wire::kRecipientId);
  w.zeros(wire::kSignature);
  if (m.tx) {
    w.put(m.tx->id, 8);
    w.put(m.tx->created_at_ms, 4);
    w.zeros(m.tx->payload_size - Transaction::kMinPayload);
  }
  w.put(m.tx_type, wire::kTransactionType);
  w.put(m.block_ref, wire::kBlock);
  w.put(m.timestamp_ms, wire::kTimestamp);
  w.put(m.sender, wire::kNodeId);
  w.put(m.view, wire::kViewNumber);
  if (m.digest) w.bytes(m.digest->bytes);
  w.put(m.client_request, wire::kClientRequest);
  w.put(m.seq, wire::kRequestNumber);
  return w.take();
}

Message decode(std::span<const std::uint8_t> frame) {
  Reader r(frame);
  const auto kind = static_cast<std::uint8_t>(r.get(1));
  const auto flags = static_cast<std::uint8_t>(r.get(1));
  if (!valid_kind(kind)) throw FrameError("unknown message kind " + std::to_string(kind));
  if ((flags & ~(wire::kFlagTx | wire::kFlagDigest)) != 0) throw FrameError("unknown flag bits");
  const bool has_tx = flags & wire::kFlagTx;
  const bool has_digest = flags & wire::kFlagDigest;
  if (has_tx && has_digest) throw FrameError("transaction and hash flags both set");

  const std::size_t fixed = wire::kFixedBody + (has_digest ? wire::kMessageHash : 0);
  if (r.remaining() < fixed) throw FrameError("truncated frame");
  const std::size_t payload = r.remaining() - fixed;
  if (has_tx && payload < Transaction::kMinPayload) throw FrameError("transaction payload too short");
  if (!has_tx && payload != 0) throw FrameError("frame length inconsistent with flags");

  Message m;
  m.kind = static_cast<MessageKind>(kind);
  const auto sender_lo = r.get(wire::kSenderId);
  const auto recipient = r.get(wire::kRecipientId);
  m.recipient = recipient == 0xFFFFFFFFULL ? kBroadcast : recipient;
  r.take(wire::kSignature);
  if (has_tx) {
    Transaction tx;
    tx.id = r.get(8);
    tx.created_at_ms = static_cast<std::uint32_t>(r.get(4));
    tx.payload_size = static_cast<std::uint32_t>(payload);
    r.take(payload - Transaction::kMinPayload);
    m.tx = tx;
  }
  m.tx_type = static_cast<std::uint32_t>(r.get(wire::kTransactionType));
  m.block_ref = r.get(wire::kBlock);
  m.timestamp_ms = static_cast<std::uint32_t>(r.get(wire::kTimestamp));
  m.sender = r.get(wire::kNodeId);
  if ((m.sender & 0xFFFFFFFFULL) != sender_lo) throw FrameError("sender id does not match node id");
  m.view = r.get(wire::kViewNumber);
  if (has_digest) {
    Digest d;
    auto raw = r.take(wire::kMessageHash);
    std::memcpy(d.bytes.data(), raw.data(), d.bytes.size());
    m.digest = d;
  }
  m.client_request = r.get(wire::kClientRequest);
  m.seq = r.get(wire::kRequestNumber);
  return m;
}

namespace {

Digest sha256_of(std::span<const std::uint8_t> data) {
  Digest d;
  SHA256(data.data(), data.size(), d.bytes.data());
  return d;
}

void append_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

Digest block_digest(SequenceNumber height, std::span<const TxId> tx_ids) {
  if (tx_ids.empty()) throw InvalidBlockError("block has no transactions");
  std::vector<std::uint8_t> buf;
  buf.reserve(8 * (tx_ids.size() + 2));
  buf.push_back('B');
  append_le(buf, height);
  for (TxId id : tx_ids) append_le(buf, id);
  return sha256_of(buf);
}

Digest null_block_digest(SequenceNumber height) {
  std::vector<std::uint8_t> buf;
  buf.push_back('N');
  append_le(buf, height);
  return sha256_of(buf);
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw std::invalid_argument("odd-length hex string");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("invalid hex digit");
  };
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

}  // namespace pbftsim
