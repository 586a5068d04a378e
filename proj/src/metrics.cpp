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

#include "pbftsim/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

namespace pbftsim {

namespace {

// Minute bins and the flush cadence of busy trackers.
constexpr SimTime kMinute = 60 * kNanosPerSecond;
constexpr SimTime kFlushEvery = 10 * kNanosPerSecond;

}  // namespace

// ---------------------------------------------------------------------------
// busy tracker

void BusyTracker::add(BusySource source, SimTime start, SimTime end) {
  if (end <= start) return;
  auto& s = streams_[static_cast<int>(source)];
  if (!s.empty() && start < s.back().start) {
    throw std::logic_error("busy intervals must be reported in start order");
  }
  if (!s.empty() && start <= s.back().end) {
    s.back().end = std::max(s.back().end, end);
  } else {
    s.push_back({start, end});
  }
}

void BusyTracker::flush(SimTime watermark) {
  if (watermark <= accounted_until_) return;
  // Two-way merge of the portions of both streams that lie before the
  // watermark; those can no longer gain overlap from future intervals.
  auto& a = streams_[0];
  auto& b = streams_[1];
  std::size_t i = 0;
  std::size_t j = 0;
  SimTime cur_start = 0;
  SimTime cur_end = -1;
  auto take = [&](SimTime s, SimTime e) {
    s = std::max(s, accounted_until_);
    e = std::min(e, watermark);
    if (e <= s) return;
    if (s > cur_end) {
      if (cur_end > cur_start) total_ += cur_end - cur_start;
      cur_start = s;
      cur_end = e;
    } else {
      cur_end = std::max(cur_end, e);
    }
  };
  while ((i < a.size() && a[i].start < watermark) || (j < b.size() && b[j].start < watermark)) {
    const bool pick_a = j >= b.size() || b[j].start >= watermark ||
                        (i < a.size() && a[i].start < watermark && a[i].start <= b[j].start);
    if (pick_a) {
      take(a[i].start, a[i].end);
      ++i;
    } else {
      take(b[j].start, b[j].end);
      ++j;
    }
  }
  if (cur_end > cur_start) total_ += cur_end - cur_start;
  accounted_until_ = watermark;
  for (auto* s : {&a, &b}) {
    while (!s->empty() && s->front().end <= watermark) s->pop_front();
    if (!s->empty() && s->front().start < watermark) s->front().start = watermark;
  }
}

SimTime BusyTracker::finish(SimTime horizon) {
  flush(horizon);
  streams_[0].clear();
  streams_[1].clear();
  return total_;
}

// ---------------------------------------------------------------------------
// metrics

Metrics::Metrics(std::size_t nodes, SimTime duration)
    : duration_(duration), retries_(nodes, 0), drops_(nodes, 0), busy_(nodes) {
  if (nodes == 0) throw std::invalid_argument("metrics need at least one node");
  if (duration <= 0) throw std::invalid_argument("duration must be positive");
  minutes_.assign(static_cast<std::size_t>((duration + kMinute - 1) / kMinute), 0);
}

void Metrics::record_commit(SimTime at, SequenceNumber height) {
  if (height <= counted_height_) return;
  counted_height_ = height;
  if (at < 0) return;
  auto bin = static_cast<std::size_t>(at / kMinute);
  bin = std::min(bin, minutes_.size() - 1);
  ++minutes_[bin];
}

void Metrics::record_retry(NodeId node) { ++retries_.at(node); }
void Metrics::record_drop(NodeId node) { ++drops_.at(node); }

void Metrics::record_busy(NodeId node, SimTime start, SimTime end, BusySource source) {
  busy_.at(node).add(source, start, end);
}

void Metrics::advance(SimTime now) {
  if (now - last_flush_ < kFlushEvery) return;
  last_flush_ = now;
  for (auto& b : busy_) b.flush(std::min(now, duration_));
}

MetricsReport Metrics::finalize(SimTime now, const std::vector<std::uint8_t>& crashed) {
  if (now < duration_) {
    throw RunNotFinished("run stopped at " + std::to_string(to_seconds(now)) + " s of " +
                         std::to_string(to_seconds(duration_)) + " s");
  }
  if (finalized_) throw std::logic_error("metrics already finalized");
  finalized_ = true;
  MetricsReport r;
  r.duration_s = to_seconds(duration_);
  r.committed_per_minute = minutes_;
  for (auto c : minutes_) r.total_committed += c;
  r.retries_per_node = retries_;
  r.drops_per_node = drops_;
  std::uint64_t retry_sum = 0;
  std::size_t live = 0;
  double load_sum = 0.0;
  for (std::size_t i = 0; i < busy_.size(); ++i) {
    const double load = static_cast<double>(busy_[i].finish(duration_)) / static_cast<double>(duration_);
    r.load_per_node.push_back(load);
    const bool dead = i < crashed.size() && crashed[i];
    if (!dead) {
      retry_sum += retries_[i];
      load_sum += load;
      ++live;
    }
  }
  if (live > 0) {
    r.avg_retries = static_cast<double>(retry_sum) / static_cast<double>(live);
    r.mean_load = load_sum / static_cast<double>(live);
  }
  r.crashed = crashed;
  r.crashed.resize(busy_.size(), 0);
  return r;
}

// ---------------------------------------------------------------------------
// report serialization

namespace {

constexpr const char* kMagic = "pbftsim-report";

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>) {
      s += fmt_double(v[i]);
    } else {
      s += std::to_string(static_cast<std::uint64_t>(v[i]));
    }
  }
  return s;
}

template <typename T>
T parse_number(std::string_view text, const std::string& key) {
  T value{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ReportFormatError("report field '" + key + "': invalid number '" + std::string(text) + "'");
  }
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& key) {
  std::vector<T> out;
  if (text.empty()) return out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = text.find(',', pos);
    const auto piece = std::string_view(text).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if constexpr (std::is_same_v<T, std::uint8_t>) {
      const auto v = parse_number<unsigned>(piece, key);
      if (v > 1) throw ReportFormatError("report field '" + key + "': expected 0 or 1");
      out.push_back(static_cast<std::uint8_t>(v));
    } else {
      out.push_back(parse_number<T>(piece, key));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

std::string MetricsReport::serialize() const {
  std::ostringstream os;
  os << kMagic << " v" << kSchemaVersion << '\n';
  os << "seed=" << seed << '\n';
  os << "duration_s=" << fmt_double(duration_s) << '\n';
  os << "committed_per_minute=" << join(committed_per_minute) << '\n';
  os << "total_committed=" << total_committed << '\n';
  os << "retries_per_node=" << join(retries_per_node) << '\n';
  os << "avg_retries=" << fmt_double(avg_retries) << '\n';
  os << "load_per_node=" << join(load_per_node) << '\n';
  os << "mean_load=" << fmt_double(mean_load) << '\n';
  os << "drops_per_node=" << join(drops_per_node) << '\n';
  os << "ledger_heights=" << join(ledger_heights) << '\n';
  os << "crashed=" << join(crashed) << '\n';
  os << "view_changes=" << view_changes << '\n';
  os << "final_view=" << final_view << '\n';
  os << "messages_sent=" << messages_sent << '\n';
  os << "trace_hash=" << trace_hash << '\n';
  for (const auto& [k, v] : config) os << "config." << k << '=' << v << '\n';
  return os.str();
}

MetricsReport MetricsReport::parse(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ReportFormatError("empty report");
  const std::string expected = std::string(kMagic) + " v" + std::to_string(kSchemaVersion);
  if (line.rfind(kMagic, 0) != 0) throw ReportFormatError("not a report: missing header");
  if (line != expected) throw ReportFormatError("unsupported report schema '" + line + "'");

  std::map<std::string, std::string> fields;
  MetricsReport r;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ReportFormatError("report line " + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key.rfind("config.", 0) == 0) {
      r.config.emplace_back(key.substr(7), value);
      continue;
    }
    if (!fields.emplace(key, value).second) throw ReportFormatError("duplicate report field '" + key + "'");
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw ReportFormatError(std::string("report field '") + key + "' missing");
    return it->second;
  };
  r.seed = parse_number<std::uint64_t>(need("seed"), "seed");
  r.duration_s = parse_number<double>(need("duration_s"), "duration_s");
  r.committed_per_minute = parse_list<std::uint64_t>(need("committed_per_minute"), "committed_per_minute");
  r.total_committed = parse_number<std::uint64_t>(need("total_committed"), "total_committed");
  r.retries_per_node = parse_list<std::uint64_t>(need("retries_per_node"), "retries_per_node");
  r.avg_retries = parse_number<double>(need("avg_retries"), "avg_retries");
  r.load_per_node = parse_list<double>(need("load_per_node"), "load_per_node");
  r.mean_load = parse_number<double>(need("mean_load"), "mean_load");
  r.drops_per_node = parse_list<std::uint64_t>(need("drops_per_node"), "drops_per_node");
  r.ledger_heights = parse_list<std::uint64_t>(need("ledger_heights"), "ledger_heights");
  r.crashed = parse_list<std::uint8_t>(need("crashed"), "crashed");
  r.view_changes = parse_number<std::uint64_t>(need("view_changes"), "view_changes");
  r.final_view = parse_number<std::uint64_t>(need("final_view"), "final_view");
  r.messages_sent = parse_number<std::uint64_t>(need("messages_sent"), "messages_sent");
  r.trace_hash = parse_number<std::uint64_t>(need("trace_hash"), "trace_hash");
  if (fields.size() != 15) throw ReportFormatError("report has unknown fields");
  return r;
}

}  // namespace pbftsim
