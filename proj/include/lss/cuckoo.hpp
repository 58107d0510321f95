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

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "lss/common.hpp"
#include "lss/wire.hpp"

namespace lss {

/// (2,4) cuckoo table keyed by 16-bit fingerprints. Each slot carries the
/// flow's cluster index and, until the table is squeezed, its running total.
///
/// Alternate buckets use partial-key cuckoo hashing: alt = i ^ H(fp), so a
/// stored fingerprint can be relocated without the original key. Fingerprint
/// zero marks an empty slot.
class CuckooTable {
 public:
  static constexpr std::size_t kSlotsPerBucket = 4;
  static constexpr double kMaxLoad = 0.95;
  static constexpr std::size_t kDefaultMaxKicks = 500;

  struct Entry {
    std::uint8_t cluster = 0;
    std::optional<std::uint64_t> value;

    friend bool operator==(const Entry&, const Entry&) = default;
  };

  /// `bucket_count` must be a power of two.
  explicit CuckooTable(std::size_t bucket_count, std::size_t max_kicks = kDefaultMaxKicks,
                       std::uint64_t seed = 0)
      : bucket_count_(bucket_count),
        max_kicks_(max_kicks),
        seed_(seed),
        rng_(seed ^ 0xC0C0C0C0ULL),
        fingerprints_(bucket_count * kSlotsPerBucket, 0),
        clusters_(bucket_count * kSlotsPerBucket, 0),
        values_(bucket_count * kSlotsPerBucket, 0) {
    if (bucket_count == 0 || !std::has_single_bit(bucket_count)) {
      throw InvalidInput("cuckoo bucket count must be a power of two");
    }
  }

  /// Sized for 1.2x the expected flows, rounded up to a power of two slots.
  static CuckooTable for_flows(std::size_t expected_flows, std::size_t max_kicks = kDefaultMaxKicks,
                               std::uint64_t seed = 0) {
    const auto slots = static_cast<std::size_t>(std::ceil(1.2 * static_cast<double>(std::max<std::size_t>(expected_flows, 1))));
    const std::size_t buckets = std::bit_ceil((slots + kSlotsPerBucket - 1) / kSlotsPerBucket);
    return CuckooTable(buckets, max_kicks, seed);
  }

  void insert(const FlowKey& key, std::uint8_t cluster, std::uint64_t value) {
    require_open();
    if (static_cast<double>(size_ + 1) > kMaxLoad * static_cast<double>(capacity())) {
      throw CapacityError("cuckoo table load factor limit reached");
    }
    const auto [i1, fp] = locate(key);
    const std::size_t i2 = alt_bucket(i1, fp);
    if (place(i1, fp, cluster, value) || place(i2, fp, cluster, value)) {
      ++size_;
      return;
    }

    // Random-walk eviction. Every swap is logged so a failed walk can be
    // undone and the table left exactly as it was.
    struct Carried {
      std::uint16_t fp;
      std::uint8_t cluster;
      std::uint64_t value;
    } carried{fp, cluster, value};
    std::vector<std::size_t> path;
    std::size_t bucket = (rng_() & 1) ? i1 : i2;
    for (std::size_t kick = 0; kick < max_kicks_; ++kick) {
      const std::size_t slot = bucket * kSlotsPerBucket + static_cast<std::size_t>(uniform_below(rng_, kSlotsPerBucket));
      swap_slot(slot, carried.fp, carried.cluster, carried.value);
      path.push_back(slot);
      bucket = alt_bucket(bucket, carried.fp);
      if (place(bucket, carried.fp, carried.cluster, carried.value)) {
        ++size_;
        return;
      }
    }
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      swap_slot(*it, carried.fp, carried.cluster, carried.value);
    }
    throw CapacityError("cuckoo insert failed after max kicks");
  }

  std::optional<Entry> lookup(const FlowKey& key) const {
    const auto slot = find(key);
    if (!slot) return std::nullopt;
    Entry e{clusters_[*slot], std::nullopt};
    if (!squeezed_) e.value = values_[*slot];
    return e;
  }

  bool contains(const FlowKey& key) const { return find(key).has_value(); }

  void update(const FlowKey& key, std::uint8_t cluster, std::uint64_t value) {
    require_open();
    const auto slot = find(key);
    if (!slot) throw NotFound("cuckoo update: key not present");
    clusters_[*slot] = cluster;
    values_[*slot] = value;
  }

  void erase(const FlowKey& key) {
    require_open();
    const auto slot = find(key);
    if (!slot) throw NotFound("cuckoo delete: key not present");
    fingerprints_[*slot] = 0;
    clusters_[*slot] = 0;
    values_[*slot] = 0;
    --size_;
  }

  /// Drops the cached running totals; only fingerprint and cluster index
  /// remain. The table is read-only afterwards.
  void squeeze() {
    squeezed_ = true;
    values_.clear();
    values_.shrink_to_fit();
  }

  bool squeezed() const noexcept { return squeezed_; }
  std::size_t size() const noexcept { return size_; }
  std::size_t bucket_count() const noexcept { return bucket_count_; }
  std::size_t capacity() const noexcept { return bucket_count_ * kSlotsPerBucket; }
  std::size_t max_kicks() const noexcept { return max_kicks_; }
  std::uint64_t seed() const noexcept { return seed_; }
  double load_factor() const noexcept { return static_cast<double>(size_) / static_cast<double>(capacity()); }

  /// Bytes per slot: 2 (fingerprint) + 1 (cluster) + 8 (running total, open tables only).
  std::size_t slot_bytes() const noexcept { return squeezed_ ? 3 : 11; }
  std::size_t memory_bytes() const noexcept { return capacity() * slot_bytes(); }

  /// Fingerprint and primary bucket of a key; exposed for tests that need
  /// to construct colliding keys.
  std::pair<std::size_t, std::uint16_t> locate(const FlowKey& key) const noexcept {
    const std::uint64_t h = key.hash(seed_);
    auto fp = static_cast<std::uint16_t>(h >> 48);
    if (fp == 0) fp = 1;
    return {static_cast<std::size_t>(h) & (bucket_count_ - 1), fp};
  }

  std::size_t alt_bucket(std::size_t bucket, std::uint16_t fp) const noexcept {
    return (bucket ^ static_cast<std::size_t>(mix64(fp))) & (bucket_count_ - 1);
  }

  void write(wire::Writer& w) const {
    w.u32(static_cast<std::uint32_t>(bucket_count_));
    w.u32(static_cast<std::uint32_t>(max_kicks_));
    w.u64(seed_);
    w.u8(squeezed_ ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(size_));
    for (std::size_t s = 0; s < capacity(); ++s) {
      w.u16(fingerprints_[s]);
      w.u8(clusters_[s]);
      if (!squeezed_) w.u64(values_[s]);
    }
  }

  static CuckooTable read(wire::Reader& r) {
    const std::size_t at = r.offset();
    const std::uint32_t buckets = r.u32();
    if (buckets == 0 || !std::has_single_bit(buckets)) throw DecodeError("bad cuckoo bucket count", at);
    if (static_cast<std::size_t>(buckets) * kSlotsPerBucket * 3 > r.remaining()) {
      throw DecodeError("cuckoo table larger than payload", at);
    }
    const std::uint32_t kicks = r.u32();
    const std::uint64_t seed = r.u64();
    const std::uint8_t squeezed = r.u8();
    if (squeezed > 1) r.fail("bad squeeze flag");
    const std::uint32_t size = r.u32();
    CuckooTable t(buckets, kicks, seed);
    std::size_t occupied = 0;
    for (std::size_t s = 0; s < t.capacity(); ++s) {
      t.fingerprints_[s] = r.u16();
      t.clusters_[s] = r.u8();
      if (!squeezed) t.values_[s] = r.u64();
      occupied += t.fingerprints_[s] != 0 ? 1 : 0;
    }
    if (occupied != size) r.fail("cuckoo occupancy does not match header");
    t.size_ = size;
    if (squeezed) t.squeeze();
    return t;
  }

  friend bool operator==(const CuckooTable& a, const CuckooTable& b) {
    return a.bucket_count_ == b.bucket_count_ && a.max_kicks_ == b.max_kicks_ && a.seed_ == b.seed_ &&
           a.squeezed_ == b.squeezed_ && a.size_ == b.size_ && a.fingerprints_ == b.fingerprints_ &&
           a.clusters_ == b.clusters_ && a.values_ == b.values_;
  }

 private:
  void require_open() const {
    if (squeezed_) throw InvalidInput("cuckoo table is squeezed and read-only");
  }

  std::optional<std::size_t> find(const FlowKey& key) const {
    const auto [i1, fp] = locate(key);
    for (std::size_t b : {i1, alt_bucket(i1, fp)}) {
      for (std::size_t s = b * kSlotsPerBucket; s < (b + 1) * kSlotsPerBucket; ++s) {
        if (fingerprints_[s] == fp) return s;
      }
    }
    return std::nullopt;
  }

  bool place(std::size_t bucket, std::uint16_t fp, std::uint8_t cluster, std::uint64_t value) {
    for (std::size_t s = bucket * kSlotsPerBucket; s < (bucket + 1) * kSlotsPerBucket; ++s) {
      if (fingerprints_[s] == 0) {
        fingerprints_[s] = fp;
        clusters_[s] = cluster;
        values_[s] = value;
        return true;
      }
    }
    return false;
  }

  void swap_slot(std::size_t slot, std::uint16_t& fp, std::uint8_t& cluster, std::uint64_t& value) {
    std::swap(fingerprints_[slot], fp);
    std::swap(clusters_[slot], cluster);
    std::swap(values_[slot], value);
  }

  std::size_t bucket_count_;
  std::size_t max_kicks_;
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<std::uint16_t> fingerprints_;
  std::vector<std::uint8_t> clusters_;
  std::vector<std::uint64_t> values_;
  std::size_t size_ = 0;
  bool squeezed_ = false;
};

}  // namespace lss
