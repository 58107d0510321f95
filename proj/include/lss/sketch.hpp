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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lss/clustering.hpp"
#include "lss/common.hpp"
#include "lss/cuckoo.hpp"
#include "lss/wire.hpp"

namespace lss {

struct Bucket {
  std::uint64_t val_sum = 0;
  std::uint64_t key_count = 0;

  friend bool operator==(const Bucket&, const Bucket&) = default;
};

/// Exact bucket average; `value()` is the ValSum / KeyCount estimator.
struct Estimate {
  std::uint64_t val_sum = 0;
  std::uint64_t key_count = 0;

  double value() const noexcept {
    return key_count == 0 ? 0.0 : static_cast<double>(val_sum) / static_cast<double>(key_count);
  }
};

struct SketchOptions {
  std::uint64_t hash_seed = 0x15C0FFEEULL;
  /// Bits per serialized bucket field; accumulators are always 64-bit in memory.
  int counter_width = 32;
  /// Sizes the membership table; 0 means 10 * m (the default m = 0.1 N).
  std::size_t expected_flows = 0;
  std::size_t max_kicks = CuckooTable::kDefaultMaxKicks;
  AllocationPolicy policy;
};

namespace detail {

inline bool valid_counter_width(int w) { return w == 8 || w == 16 || w == 32 || w == 64; }

inline std::uint64_t width_max(int w) {
  return w == 64 ? std::numeric_limits<std::uint64_t>::max() : (std::uint64_t{1} << w) - 1;
}

inline std::uint64_t membership_seed(std::uint64_t hash_seed) { return mix64(hash_seed ^ 0x4D454D42ULL); }

}  // namespace detail

/// Entropy (bits) of the frequency distribution of flow sizes: every
/// distinct size value is one outcome.
inline double size_entropy(std::span<const double> sizes) {
  if (sizes.empty()) throw InvalidInput("entropy of an empty size list");
  std::map<double, std::size_t> freq;
  for (double s : sizes) ++freq[s];
  const double n = static_cast<double>(sizes.size());
  double h = 0.0;
  for (const auto& [size, c] : freq) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h == 0.0 ? 0.0 : h;
}

/// Locality-sensitive sketch: one bucket array per value cluster, queried by
/// bucket averaging. Membership (fingerprint -> cluster index, plus the
/// running flow total while the window is open) lives in a cuckoo table.
///
/// Single writer. After close() the sketch is immutable and may be shared.
class LssSketch {
 public:
  LssSketch(ClusterModel model, std::uint32_t m, const SketchOptions& opts = {})
      : model_(std::move(model)),
        m_(m),
        opts_(opts),
        membership_(CuckooTable::for_flows(opts.expected_flows ? opts.expected_flows : std::size_t{10} * m,
                                           opts.max_kicks, detail::membership_seed(opts.hash_seed))) {
    if (model_.k() == 0) throw InvalidInput("cluster model is empty");
    if (model_.k() > kMaxClusters) throw InvalidInput("at most 256 clusters are supported");
    if (!detail::valid_counter_width(opts.counter_width)) throw InvalidInput("counter width must be 8, 16, 32 or 64");
    model_.allocation = allocate_buckets(model_, m, opts.policy);
    arrays_.reserve(model_.k());
    for (std::uint32_t size : model_.allocation) arrays_.emplace_back(size);
  }

  const ClusterModel& model() const noexcept { return model_; }
  std::uint32_t m() const noexcept { return m_; }
  std::size_t k() const noexcept { return model_.k(); }
  std::uint64_t hash_seed() const noexcept { return opts_.hash_seed; }
  int counter_width() const noexcept { return opts_.counter_width; }
  const std::vector<std::vector<Bucket>>& arrays() const noexcept { return arrays_; }
  const CuckooTable& membership() const noexcept { return membership_; }
  bool closed() const noexcept { return membership_.squeezed(); }

  /// Set once any field has exceeded the configured counter width.
  bool overflowed() const noexcept { return overflow_; }

  /// Bucket position of `key` inside `array`; one hash shared by all arrays.
  std::size_t bucket_index(const FlowKey& key, std::size_t array) const {
    return static_cast<std::size_t>(key.hash(opts_.hash_seed) % arrays_.at(array).size());
  }

  /// Inserts a key that has not been seen before.
  void insert(const FlowKey& key, std::uint64_t value) {
    require_open();
    const std::size_t i = model_.nearest_center(static_cast<double>(value));
    membership_.insert(key, static_cast<std::uint8_t>(i), value);
    Bucket& b = arrays_[i][bucket_index(key, i)];
    add(b.val_sum, value);
    add(b.key_count, 1);
  }

  /// Accumulates a (possibly repeated) flow fragment, keeping the flow in the
  /// array of the center nearest its running total. Throws ConsistencyError
  /// without modifying anything when the relocation would underflow the old
  /// bucket, which only happens after a fingerprint collision.
  void insert_duplicate(const FlowKey& key, std::uint64_t value) {
    require_open();
    const auto entry = membership_.lookup(key);
    if (!entry) {
      insert(key, value);
      return;
    }
    const std::size_t current = entry->cluster;
    const std::uint64_t total = sat_add(*entry->value, value);
    const std::size_t target = model_.nearest_center(static_cast<double>(total));
    if (current >= arrays_.size()) throw ConsistencyError("membership cluster index out of range");
    Bucket& old_bucket = arrays_[current][bucket_index(key, current)];

    if (target == current) {
      add(old_bucket.val_sum, value);
      membership_.update(key, static_cast<std::uint8_t>(current), total);
      return;
    }
    // The fragment lands in the old bucket first, then the whole running
    // total moves to the new array.
    const std::uint64_t staged = sat_add(old_bucket.val_sum, value);
    if (staged < total || old_bucket.key_count == 0) {
      throw ConsistencyError("relocation would underflow the source bucket");
    }
    old_bucket.val_sum = staged - total;
    old_bucket.key_count -= 1;
    Bucket& new_bucket = arrays_[target][bucket_index(key, target)];
    add(new_bucket.val_sum, total);
    add(new_bucket.key_count, 1);
    membership_.update(key, static_cast<std::uint8_t>(target), total);
  }

  bool contains(const FlowKey& key) const { return membership_.contains(key); }

  Estimate query_fraction(const FlowKey& key) const {
    const auto entry = membership_.lookup(key);
    if (!entry) throw NotFound("key is not a member of this sketch");
    if (entry->cluster >= arrays_.size()) throw NotFound("membership cluster index out of range");
    const Bucket& b = arrays_[entry->cluster][bucket_index(key, entry->cluster)];
    if (b.key_count == 0) throw NotFound("key maps to an empty bucket");
    return {b.val_sum, b.key_count};
  }

  double query(const FlowKey& key) const { return query_fraction(key).value(); }

  /// Exact number of distinct inserted flows (sum of KeyCount).
  std::uint64_t cardinality() const noexcept {
    std::uint64_t n = 0;
    for (const auto& arr : arrays_)
      for (const Bucket& b : arr) n += b.key_count;
    return n;
  }

  std::uint64_t total_value() const noexcept {
    std::uint64_t n = 0;
    for (const auto& arr : arrays_)
      for (const Bucket& b : arr) n += b.val_sum;
    return n;
  }

  std::vector<double> size_distribution(std::span<const FlowKey> keys) const {
    std::vector<double> out;
    out.reserve(keys.size());
    for (const FlowKey& k : keys) out.push_back(query(k));
    return out;
  }

  /// The estimate multiset over every inserted flow, read off the buckets:
  /// each bucket contributes KeyCount copies of its average. Needs no keys.
  std::vector<double> inserted_size_distribution() const {
    std::vector<double> out;
    for (const auto& arr : arrays_) {
      for (const Bucket& b : arr) {
        const double v = Estimate{b.val_sum, b.key_count}.value();
        out.insert(out.end(), b.key_count, v);
      }
    }
    return out;
  }

  double entropy(std::span<const FlowKey> keys) const {
    if (keys.empty()) throw InvalidInput("entropy needs at least one key");
    const auto sizes = size_distribution(keys);
    return size_entropy(sizes);
  }

  /// Keys whose estimate exceeds `threshold`, largest first.
  std::vector<std::pair<FlowKey, double>> heavy_hitters(std::span<const FlowKey> keys, double threshold) const {
    if (threshold < 0.0) throw InvalidInput("heavy-hitter threshold must be non-negative");
    std::vector<std::pair<FlowKey, double>> out;
    for (const FlowKey& k : keys) {
      const double est = query(k);
      if (est > threshold) out.emplace_back(k, est);
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
  }

  /// Estimate, or nullopt if the key is not a member.
  std::optional<double> try_query(const FlowKey& key) const {
    try {
      return query(key);
    } catch (const NotFound&) {
      return std::nullopt;
    }
  }

  /// Ends the window: the membership table drops its running totals.
  void close() { membership_.squeeze(); }

  /// Sketch memory at the serialized width: m buckets of two fields plus
  /// four bytes per center. Membership is accounted separately.
  std::size_t sketch_bytes() const noexcept {
    return static_cast<std::size_t>(m_) * 2 * static_cast<std::size_t>(opts_.counter_width / 8) + 4 * model_.k();
  }

  /// Membership memory once squeezed (3 bytes per slot).
  std::size_t membership_bytes() const noexcept { return membership_.capacity() * 3; }

  // -------------------------------------------------------------------------
  // Binary container: magic, version, tag, counter width, flags, k, m, hash
  // seed, f32 centers, u32 allocation, then (val_sum, key_count) pairs in
  // array order at the counter width, optionally followed by membership.

  wire::Bytes serialize(bool with_membership = true) const {
    wire::Writer w;
    w.raw(wire::kSketchMagic);
    w.u16(wire::kSketchVersion);
    w.u8(static_cast<std::uint8_t>(wire::Structure::lss));
    w.u8(static_cast<std::uint8_t>(opts_.counter_width));
    w.u8(static_cast<std::uint8_t>((overflow_ ? 1 : 0) | (with_membership ? 2 : 0)));
    w.u16(static_cast<std::uint16_t>(model_.k()));
    w.u32(m_);
    w.u64(opts_.hash_seed);
    for (double c : model_.centers) w.f32(static_cast<float>(c));
    for (std::uint32_t a : model_.allocation) w.u32(a);
    const int bytes = opts_.counter_width / 8;
    const std::uint64_t cap = detail::width_max(opts_.counter_width);
    for (const auto& arr : arrays_) {
      for (const Bucket& b : arr) {
        w.uint(std::min(b.val_sum, cap), bytes);
        w.uint(std::min(b.key_count, cap), bytes);
      }
    }
    if (with_membership) membership_.write(w);
    return std::move(w).take();
  }

  static LssSketch deserialize(std::span<const std::uint8_t> bytes) {
    wire::Reader r(bytes);
    auto s = read(r);
    r.expect_end();
    return s;
  }

  static LssSketch read(wire::Reader& r) {
    r.expect_magic(wire::kSketchMagic);
    if (r.u16() != wire::kSketchVersion) r.fail("unsupported sketch version");
    if (r.u8() != static_cast<std::uint8_t>(wire::Structure::lss)) r.fail("not an LSS sketch");
    const int width = r.u8();
    if (!detail::valid_counter_width(width)) r.fail("bad counter width");
    const std::uint8_t flags = r.u8();
    if (flags > 3) r.fail("bad flags");
    const std::size_t k = r.u16();
    if (k == 0 || k > kMaxClusters) r.fail("bad cluster count");
    const std::uint32_t m = r.u32();
    const std::uint64_t seed = r.u64();

    ClusterModel model;
    for (std::size_t i = 0; i < k; ++i) model.centers.push_back(r.f32());
    if (!std::is_sorted(model.centers.begin(), model.centers.end())) r.fail("centers not ascending");
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint32_t a = r.u32();
      if (a == 0) r.fail("empty bucket array");
      model.allocation.push_back(a);
      total += a;
    }
    if (total != m) r.fail("allocation does not sum to m");
    const auto bytes = static_cast<std::size_t>(width / 8);
    if (r.remaining() / (2 * bytes) < m) r.fail("bucket section truncated");

    SketchOptions opts;
    opts.hash_seed = seed;
    opts.counter_width = width;
    LssSketch s(std::move(model), m, opts, PartsTag{});
    s.overflow_ = (flags & 1) != 0;
    for (auto& arr : s.arrays_) {
      for (Bucket& b : arr) {
        b.val_sum = r.uint(width / 8);
        b.key_count = r.uint(width / 8);
        if (b.key_count == 0 && b.val_sum != 0) r.fail("bucket with value but no keys");
      }
    }
    if (flags & 2) {
      s.membership_ = CuckooTable::read(r);
    } else {
      s.membership_ = CuckooTable(1, 0, detail::membership_seed(seed));
      s.membership_.squeeze();
    }
    return s;
  }

  friend bool operator==(const LssSketch& a, const LssSketch& b) {
    return a.model_.centers == b.model_.centers && a.model_.allocation == b.model_.allocation && a.m_ == b.m_ &&
           a.opts_.hash_seed == b.opts_.hash_seed && a.opts_.counter_width == b.opts_.counter_width &&
           a.arrays_ == b.arrays_ && a.overflow_ == b.overflow_;
  }

 private:
  struct PartsTag {};

  // Reconstruction from a decoded container: the allocation is taken as-is.
  LssSketch(ClusterModel model, std::uint32_t m, const SketchOptions& opts, PartsTag)
      : model_(std::move(model)), m_(m), opts_(opts), membership_(1, 0, detail::membership_seed(opts.hash_seed)) {
    for (std::uint32_t size : model_.allocation) arrays_.emplace_back(size);
  }

  void require_open() const {
    if (closed()) throw InvalidInput("sketch window is closed");
  }

  std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r;
    if (__builtin_add_overflow(a, b, &r)) {
      overflow_ = true;
      return std::numeric_limits<std::uint64_t>::max();
    }
    return r;
  }

  void add(std::uint64_t& field, std::uint64_t v) {
    field = sat_add(field, v);
    if (field > detail::width_max(opts_.counter_width)) overflow_ = true;
  }

  ClusterModel model_;
  std::uint32_t m_;
  SketchOptions opts_;
  std::vector<std::vector<Bucket>> arrays_;
  CuckooTable membership_;
  bool overflow_ = false;
};

/// Keys whose estimates in two windows differ by more than `threshold`.
/// A key missing from one window counts as zero there; keys missing from
/// both are skipped.
inline std::vector<FlowKey> heavy_changes(const LssSketch& a, const LssSketch& b, std::span<const FlowKey> keys,
                                          double threshold) {
  if (a.model().centers != b.model().centers) throw InvalidInput("sketches do not share a cluster model");
  std::vector<FlowKey> out;
  for (const FlowKey& k : keys) {
    const auto ea = a.try_query(k);
    const auto eb = b.try_query(k);
    if (!ea && !eb) continue;
    if (std::abs(ea.value_or(0.0) - eb.value_or(0.0)) > threshold) out.push_back(k);
  }
  return out;
}

}  // namespace lss
