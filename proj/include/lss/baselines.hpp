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
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "lss/common.hpp"
#include "lss/wire.hpp"

namespace lss {

inline constexpr std::size_t kDefaultBanks = 3;

namespace detail {

inline std::uint64_t bank_seed(std::uint64_t seed, std::size_t bank) {
  return mix64(seed + 0x9E3779B97F4A7C15ULL * (bank + 1));
}

inline void check_dims(std::size_t banks, std::size_t width) {
  if (banks == 0 || banks > 255) throw InvalidInput("bank count must be in [1, 255]");
  if (width == 0) throw InvalidInput("bank width must be positive");
}

inline void write_header(wire::Writer& w, wire::Structure tag, int counter_width, std::size_t banks,
                         std::size_t width, std::uint64_t seed) {
  w.raw(wire::kSketchMagic);
  w.u16(wire::kSketchVersion);
  w.u8(static_cast<std::uint8_t>(tag));
  w.u8(static_cast<std::uint8_t>(counter_width));
  w.u8(static_cast<std::uint8_t>(banks));
  w.u32(static_cast<std::uint32_t>(width));
  w.u64(seed);
}

struct BankHeader {
  int counter_width;
  std::size_t banks;
  std::size_t width;
  std::uint64_t seed;
};

inline BankHeader read_header(wire::Reader& r, wire::Structure tag) {
  r.expect_magic(wire::kSketchMagic);
  if (r.u16() != wire::kSketchVersion) r.fail("unsupported sketch version");
  if (r.u8() != static_cast<std::uint8_t>(tag)) r.fail("unexpected structure tag");
  BankHeader h;
  h.counter_width = r.u8();
  if (h.counter_width != 8 && h.counter_width != 16 && h.counter_width != 32 && h.counter_width != 64) {
    r.fail("bad counter width");
  }
  h.banks = r.u8();
  h.width = r.u32();
  h.seed = r.u64();
  if (h.banks == 0 || h.width == 0) r.fail("empty bank layout");
  if (r.remaining() / static_cast<std::size_t>(h.counter_width / 8) / h.banks < h.width) {
    r.fail("counter section truncated");
  }
  return h;
}

}  // namespace detail

/// Count-Min: `banks` rows of `width` counters, queried by the minimum of the
/// mapped counters. Never underestimates for non-negative streams.
class CountMinSketch {
 public:
  CountMinSketch(std::size_t banks, std::size_t width, std::uint64_t seed = 0, int counter_width = 32)
      : banks_(banks), width_(width), seed_(seed), counter_width_(counter_width), counters_(banks * width, 0) {
    detail::check_dims(banks, width);
    for (std::size_t j = 0; j < banks; ++j) seeds_.push_back(detail::bank_seed(seed, j));
  }

  /// Splits a total counter budget evenly across banks (remainder dropped).
  static CountMinSketch with_total(std::size_t total_counters, std::size_t banks = kDefaultBanks,
                                   std::uint64_t seed = 0, int counter_width = 32) {
    return CountMinSketch(banks, total_counters / banks, seed, counter_width);
  }

  void insert(const FlowKey& key, std::uint64_t value) {
    for (std::size_t j = 0; j < banks_; ++j) {
      std::uint64_t& c = counters_[j * width_ + index(key, j)];
      c = c > std::numeric_limits<std::uint64_t>::max() - value ? std::numeric_limits<std::uint64_t>::max() : c + value;
    }
  }

  std::uint64_t query(const FlowKey& key) const {
    std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
    for (std::size_t j = 0; j < banks_; ++j) best = std::min(best, counters_[j * width_ + index(key, j)]);
    return best;
  }

  std::size_t index(const FlowKey& key, std::size_t bank) const {
    return static_cast<std::size_t>(key.hash(seeds_[bank]) % width_);
  }

  std::size_t banks() const noexcept { return banks_; }
  std::size_t width() const noexcept { return width_; }
  std::span<const std::uint64_t> bank(std::size_t j) const { return {counters_.data() + j * width_, width_}; }
  std::size_t memory_bytes() const noexcept { return counters_.size() * static_cast<std::size_t>(counter_width_ / 8); }

  wire::Bytes serialize() const {
    wire::Writer w;
    detail::write_header(w, wire::Structure::count_min, counter_width_, banks_, width_, seed_);
    const int bytes = counter_width_ / 8;
    const std::uint64_t cap = counter_width_ == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << counter_width_) - 1;
    for (std::uint64_t c : counters_) w.uint(std::min(c, cap), bytes);
    return std::move(w).take();
  }

  static CountMinSketch deserialize(std::span<const std::uint8_t> in) {
    wire::Reader r(in);
    const auto h = detail::read_header(r, wire::Structure::count_min);
    CountMinSketch s(h.banks, h.width, h.seed, h.counter_width);
    for (auto& c : s.counters_) c = r.uint(h.counter_width / 8);
    r.expect_end();
    return s;
  }

  friend bool operator==(const CountMinSketch&, const CountMinSketch&) = default;

 private:
  std::size_t banks_;
  std::size_t width_;
  std::uint64_t seed_;
  int counter_width_;
  std::vector<std::uint64_t> counters_;
  std::vector<std::uint64_t> seeds_;
};

/// Count-Sketch: signed counters, each bank weighting updates by a hashed
/// +/-1, queried by the (lower) median of the sign-corrected reads.
class CountSketch {
 public:
  CountSketch(std::size_t banks, std::size_t width, std::uint64_t seed = 0, int counter_width = 32)
      : banks_(banks), width_(width), seed_(seed), counter_width_(counter_width), counters_(banks * width, 0) {
    detail::check_dims(banks, width);
    for (std::size_t j = 0; j < banks; ++j) seeds_.push_back(detail::bank_seed(seed ^ 0x5167ULL, j));
  }

  static CountSketch with_total(std::size_t total_counters, std::size_t banks = kDefaultBanks,
                                std::uint64_t seed = 0, int counter_width = 32) {
    return CountSketch(banks, total_counters / banks, seed, counter_width);
  }

  void insert(const FlowKey& key, std::uint64_t value) {
    const auto v = static_cast<std::int64_t>(value);
    for (std::size_t j = 0; j < banks_; ++j) {
      const std::uint64_t h = key.hash(seeds_[j]);
      counters_[j * width_ + static_cast<std::size_t>(h % width_)] += sign_of(h) * v;
    }
  }

  /// Raw median estimate; may be negative.
  std::int64_t query(const FlowKey& key) const {
    std::vector<std::int64_t> reads(banks_);
    for (std::size_t j = 0; j < banks_; ++j) {
      const std::uint64_t h = key.hash(seeds_[j]);
      reads[j] = counters_[j * width_ + static_cast<std::size_t>(h % width_)] * sign_of(h);
    }
    return lower_median(reads);
  }

  /// Flow sizes are non-negative; negative medians clamp to zero.
  std::uint64_t estimate_size(const FlowKey& key) const {
    return static_cast<std::uint64_t>(std::max<std::int64_t>(0, query(key)));
  }

  int sign(const FlowKey& key, std::size_t bank) const { return static_cast<int>(sign_of(key.hash(seeds_[bank]))); }
  std::size_t index(const FlowKey& key, std::size_t bank) const {
    return static_cast<std::size_t>(key.hash(seeds_[bank]) % width_);
  }

  static std::int64_t lower_median(std::vector<std::int64_t> reads) {
    if (reads.empty()) throw InvalidInput("median of nothing");
    const std::size_t mid = (reads.size() - 1) / 2;
    std::nth_element(reads.begin(), reads.begin() + static_cast<std::ptrdiff_t>(mid), reads.end());
    return reads[mid];
  }

  std::size_t banks() const noexcept { return banks_; }
  std::size_t width() const noexcept { return width_; }
  std::span<const std::int64_t> bank(std::size_t j) const { return {counters_.data() + j * width_, width_}; }
  std::size_t memory_bytes() const noexcept { return counters_.size() * static_cast<std::size_t>(counter_width_ / 8); }

  // Counters are stored in two's complement at the counter width, clamped.
  wire::Bytes serialize() const {
    wire::Writer w;
    detail::write_header(w, wire::Structure::count_sketch, counter_width_, banks_, width_, seed_);
    const int bytes = counter_width_ / 8;
    const std::int64_t hi = counter_width_ == 64 ? std::numeric_limits<std::int64_t>::max()
                                                 : (std::int64_t{1} << (counter_width_ - 1)) - 1;
    const std::int64_t lo = -hi - 1;
    for (std::int64_t c : counters_) w.uint(static_cast<std::uint64_t>(std::clamp(c, lo, hi)), bytes);
    return std::move(w).take();
  }

  static CountSketch deserialize(std::span<const std::uint8_t> in) {
    wire::Reader r(in);
    const auto h = detail::read_header(r, wire::Structure::count_sketch);
    CountSketch s(h.banks, h.width, h.seed, h.counter_width);
    const int bits = h.counter_width;
    for (auto& c : s.counters_) {
      std::uint64_t raw = r.uint(bits / 8);
      if (bits < 64 && (raw >> (bits - 1)) & 1) raw |= ~std::uint64_t{0} << bits;  // sign-extend
      c = static_cast<std::int64_t>(raw);
    }
    r.expect_end();
    return s;
  }

  friend bool operator==(const CountSketch&, const CountSketch&) = default;

 private:
  static std::int64_t sign_of(std::uint64_t h) { return (h >> 63) ? -1 : 1; }

  std::size_t banks_;
  std::size_t width_;
  std::uint64_t seed_;
  int counter_width_;
  std::vector<std::int64_t> counters_;
  std::vector<std::uint64_t> seeds_;
};

/// Expected fraction of buckets holding two or more keys when N keys are
/// hashed into c banks of m/c buckets each (ball-bin model, Poisson limit).
inline double expected_noisy_fraction(double m, double n_keys, double banks) {
  if (!(m > 0.0) || !(banks > 0.0) || n_keys < 0.0) throw InvalidInput("m and c must be positive, N non-negative");
  const double load = banks * n_keys / m;
  return 1.0 - std::exp(-load) - load * std::exp(-banks * (n_keys - 1.0) / m);
}

// ---------------------------------------------------------------------------
// Dense autoencoder view of a one-array sketch: encoder I = A^T X, decoder
// X_hat = A C^+ I with C = A^T A.

/// Exact rational over 64-bit integers, always in lowest terms with a
/// positive denominator.
class Rational {
 public:
  constexpr Rational(std::int64_t num = 0, std::int64_t den = 1) : num_(num), den_(den) {
    if (den == 0) throw InvalidInput("zero denominator");
    normalize();
  }

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return from_wide(static_cast<__int128_t>(a.num_) * b.den_ + static_cast<__int128_t>(b.num_) * a.den_,
                     static_cast<__int128_t>(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from_wide(static_cast<__int128_t>(a.num_) * b.num_, static_cast<__int128_t>(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw InvalidInput("division by zero");
    return from_wide(static_cast<__int128_t>(a.num_) * b.den_, static_cast<__int128_t>(a.den_) * b.num_);
  }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }

  friend bool operator==(const Rational&, const Rational&) = default;
  friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.num_ << '/' << r.den_; }

 private:
  static Rational from_wide(__int128_t n, __int128_t d) {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128_t a = n < 0 ? -n : n;
    __int128_t b = d;
    while (b != 0) {
      const __int128_t t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    constexpr __int128_t lim = std::numeric_limits<std::int64_t>::max();
    if (n > lim || n < -lim || d > lim) throw std::overflow_error("rational overflow");
    return Rational(static_cast<std::int64_t>(n), static_cast<std::int64_t>(d));
  }

  constexpr void normalize() {
    if (den_ < 0) {
      num_ = -num_;
      den_ = -den_;
    }
    std::int64_t g = std::gcd(num_, den_);
    if (g > 1) {
      num_ /= g;
      den_ /= g;
    }
  }

  std::int64_t num_;
  std::int64_t den_;
};

/// N x m 0/1 indicator matrix with exactly one 1 per row.
class DenseMapping {
 public:
  DenseMapping(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> cells)
      : rows_(rows), cols_(cols), cells_(std::move(cells)) {
    if (cells_.size() != rows * cols) throw InvalidInput("mapping matrix has the wrong shape");
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t ones = 0;
      for (std::size_t c = 0; c < cols; ++c) {
        const auto v = at(r, c);
        if (v > 1) throw InvalidInput("mapping matrix must be 0/1");
        ones += v;
      }
      if (ones != 1) throw InvalidInput("each mapping row needs exactly one 1");
    }
  }

  /// Row r maps to column assignment[r].
  static DenseMapping from_assignment(std::span<const std::size_t> assignment, std::size_t cols) {
    std::vector<std::uint8_t> cells(assignment.size() * cols, 0);
    for (std::size_t r = 0; r < assignment.size(); ++r) {
      if (assignment[r] >= cols) throw InvalidInput("assignment column out of range");
      cells[r * cols + assignment[r]] = 1;
    }
    return DenseMapping(assignment.size(), cols, std::move(cells));
  }

  static DenseMapping identity(std::size_t n) {
    std::vector<std::size_t> a(n);
    std::iota(a.begin(), a.end(), 0);
    return from_assignment(a, n);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return cells_[r * cols_ + c]; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> cells_;
};

/// Dense decode X_hat = A C^+ A^T X, computed with full matrix products so it
/// shares nothing with the sketch's bucket arithmetic. `Scalar` is double or
/// Rational; empty buckets (zero diagonal entries of C) are skipped.
template <class Scalar>
std::vector<Scalar> autoencoder_oracle(const DenseMapping& a, std::span<const Scalar> x) {
  if (x.size() != a.rows()) throw InvalidInput("X length must equal the number of mapping rows");
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();

  std::vector<Scalar> encoded(m, Scalar(0));  // I = A^T X
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t r = 0; r < n; ++r)
      if (a.at(r, j)) encoded[j] += x[r];

  std::vector<std::int64_t> gram(m * m, 0);  // C = A^T A
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t r = 0; r < n; ++r) gram[i * m + j] += a.at(r, i) * a.at(r, j);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && gram[i * m + j] != 0) throw std::logic_error("A^T A is not diagonal");

  std::vector<Scalar> scaled(m, Scalar(0));  // C^+ I
  for (std::size_t j = 0; j < m; ++j) {
    const std::int64_t c = gram[j * m + j];
    if (c != 0) scaled[j] = encoded[j] / Scalar(c);
  }

  std::vector<Scalar> decoded(n, Scalar(0));  // A (C^+ I)
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < m; ++j)
      if (a.at(r, j)) decoded[r] += scaled[j];
  return decoded;
}

}  // namespace lss
