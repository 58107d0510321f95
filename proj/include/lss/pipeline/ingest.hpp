//  Copyright 2026 The LSS Authors
//
//  Licensed under the Apache License, Version 2.0 (the "License");
//  you may not use this file except in compliance with the License.
//  You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lss/common.hpp"
#include "lss/wire.hpp"

namespace lss::pipeline {

struct Packet {
  FlowKey key;
  std::uint64_t size_bytes = 0;
  std::int64_t ts_ns = 0;
};

/// Per-flow counters accumulated at one ingestion point and published together.
struct FlowletBatch {
  std::string source_id;
  std::uint64_t sequence = 0;
  std::int64_t emitted_at_ns = 0;
  std::vector<FlowRecord> records;

  friend bool operator==(const FlowletBatch&, const FlowletBatch&) = default;
};

inline constexpr std::array<std::uint8_t, 4> kBatchMagic{'F', 'L', 'W', 'B'};
inline constexpr std::uint16_t kBatchVersion = 1;

inline wire::Bytes encode_batch(const FlowletBatch& b) {
  wire::Writer w;
  w.raw(kBatchMagic);
  w.u16(kBatchVersion);
  w.str16(b.source_id);
  w.u64(b.sequence);
  w.i64(b.emitted_at_ns);
  w.u32(static_cast<std::uint32_t>(b.records.size()));
  for (const FlowRecord& r : b.records) {
    if (r.key.size() > 0xFF) throw InvalidInput("flow key longer than 255 bytes");
    w.u8(static_cast<std::uint8_t>(r.key.size()));
    w.raw(r.key.bytes());
    w.u64(r.value);
  }
  return std::move(w).take();
}

inline FlowletBatch decode_batch(std::span<const std::uint8_t> bytes) {
  wire::Reader r(bytes);
  r.expect_magic(kBatchMagic);
  if (r.u16() != kBatchVersion) r.fail("unsupported flowlet batch version");
  FlowletBatch b;
  b.source_id = r.str16();
  b.sequence = r.u64();
  b.emitted_at_ns = r.i64();
  const std::uint32_t n = r.u32();
  if (n > r.remaining()) r.fail("flowlet record count larger than payload");
  b.records.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint8_t len = r.u8();
    if (len == 0) r.fail("empty flow key");
    auto key = r.raw(len);
    b.records.push_back({FlowKey(std::string(key.begin(), key.end())), r.u64()});
  }
  r.expect_end();
  return b;
}

/// Ingestion point: a bounded open-addressing table of per-flow byte counters.
/// A packet of a new flow arriving at a full table publishes every entry as
/// one batch and starts over.
class IngestionStage {
 public:
  static constexpr std::size_t kDefaultCapacity = 1000;

  explicit IngestionStage(std::string source_id, std::size_t capacity = kDefaultCapacity)
      : source_id_(std::move(source_id)), capacity_(capacity) {
    if (capacity == 0) throw InvalidInput("ingestion table capacity must be positive");
    slots_.resize(std::bit_ceil(capacity * 2));
  }

  std::optional<FlowletBatch> ingest(const Packet& pkt) {
    if (pkt.size_bytes == 0) throw InvalidInput("packet size must be positive");
    ++packets_;
    bytes_ += pkt.size_bytes;
    std::size_t s = probe(pkt.key);
    if (slots_[s].used) {
      slots_[s].value += pkt.size_bytes;
      return std::nullopt;
    }
    std::optional<FlowletBatch> out;
    if (order_.size() == capacity_) {
      out = flush(pkt.ts_ns);
      s = probe(pkt.key);
    }
    slots_[s] = Slot{pkt.key, pkt.size_bytes, true};
    order_.push_back(s);
    return out;
  }

  /// Emits whatever is buffered (possibly nothing) and clears the table.
  FlowletBatch flush(std::int64_t now_ns) {
    FlowletBatch b;
    b.source_id = source_id_;
    b.sequence = next_sequence_++;
    b.emitted_at_ns = now_ns;
    b.records.reserve(order_.size());
    for (std::size_t s : order_) {
      b.records.push_back({std::move(*slots_[s].key), slots_[s].value});
      slots_[s] = Slot{};
    }
    order_.clear();
    ++batches_;
    records_ += b.records.size();
    return b;
  }

  const std::string& source_id() const noexcept { return source_id_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t buffered() const noexcept { return order_.size(); }
  std::uint64_t packets() const noexcept { return packets_; }
  std::uint64_t bytes() const noexcept { return bytes_; }
  std::uint64_t batches() const noexcept { return batches_; }
  std::uint64_t records() const noexcept { return records_; }

 private:
  struct Slot {
    std::optional<FlowKey> key;
    std::uint64_t value = 0;
    bool used = false;
  };

  // Linear probing; the table never exceeds half full.
  std::size_t probe(const FlowKey& key) const {
    const std::size_t mask = slots_.size() - 1;
    std::size_t s = static_cast<std::size_t>(key.hash(0x16E57ULL)) & mask;
    while (slots_[s].used && *slots_[s].key != key) s = (s + 1) & mask;
    return s;
  }

  std::string source_id_;
  std::size_t capacity_;
  std::vector<Slot> slots_;
  std::vector<std::size_t> order_;
  std::uint64_t next_sequence_ = 0;
  std::uint64_t packets_ = 0;
  std::uint64_t bytes_ = 0;
  std::uint64_t batches_ = 0;
  std::uint64_t records_ = 0;
};

}  // namespace lss::pipeline
