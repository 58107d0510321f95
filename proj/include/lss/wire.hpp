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
#include <array>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lss/common.hpp"

namespace lss::wire {

using Bytes = std::vector<std::uint8_t>;

// Structure tags of the shared container family.
enum class Structure : std::uint8_t { lss = 1, count_min = 2, count_sketch = 3 };

inline constexpr std::array<std::uint8_t, 4> kSketchMagic{'L', 'S', 'S', 'K'};
inline constexpr std::uint16_t kSketchVersion = 1;

/// Little-endian append-only encoder.
class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  /// Unsigned value written with `width` bytes (1..8).
  void uint(std::uint64_t v, int width) { put(v, width); }

  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  void str16(std::string_view s) {
    if (s.size() > 0xFFFF) throw InvalidInput("string too long for wire format");
    u16(static_cast<std::uint16_t>(s.size()));
    raw(s);
  }

  std::size_t size() const noexcept { return out_.size(); }
  Bytes take() && { return std::move(out_); }
  const Bytes& bytes() const noexcept { return out_; }

 private:
  void put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  Bytes out_;
};

/// Bounds-checked decoder; every failure reports the byte offset.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t uint(int width) { return get(width); }

  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::string str16() {
    const auto n = u16();
    auto s = raw(n);
    return std::string(s.begin(), s.end());
  }

  void expect_magic(std::span<const std::uint8_t> magic) {
    const std::size_t at = pos_;
    auto got = raw(magic.size());
    if (!std::equal(got.begin(), got.end(), magic.begin())) throw DecodeError("bad magic", at);
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return in_.size() - pos_; }

  void expect_end() const {
    if (pos_ != in_.size()) throw DecodeError("trailing bytes", pos_);
  }

  [[noreturn]] void fail(const std::string& what) const { throw DecodeError(what, pos_); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError("truncated input", pos_);
  }

  std::uint64_t get(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace lss::wire
