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
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lss {

// Error taxonomy shared by every module.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotFound : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an update would drive a bucket below zero. The sketch is left
// untouched when this is thrown.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

/// Seeded 64-bit hash over a byte string. Stable across platforms and runs,
/// so serialized sketches stay queryable after a round-trip.
inline std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = mix64(seed ^ (0x9E3779B97F4A7C15ULL * (bytes.size() + 1)));
  std::size_t i = 0;
  for (; i + 8 <= bytes.size(); i += 8) {
    std::uint64_t word = 0;
    for (int b = 7; b >= 0; --b) {
      word = (word << 8) | static_cast<unsigned char>(bytes[i + static_cast<std::size_t>(b)]);
    }
    h = mix64(h ^ word) + 0x9E3779B97F4A7C15ULL;
  }
  if (i < bytes.size()) {
    std::uint64_t word = 0;
    for (std::size_t b = bytes.size(); b > i; --b) {
      word = (word << 8) | static_cast<unsigned char>(bytes[b - 1]);
    }
    h = mix64(h ^ word ^ 0xA0761D6478BD642FULL);
  }
  return mix64(h);
}

/// Canonical IPv4 5-tuple.
struct FiveTuple {
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = 0;

  friend bool operator==(const FiveTuple&, const FiveTuple&) = default;
};

/// Opaque flow identifier. Two keys are equal iff their bytes are equal.
class FlowKey {
 public:
  static constexpr std::size_t kFiveTupleBytes = 13;

  explicit FlowKey(std::string bytes) : bytes_(std::move(bytes)) {
    if (bytes_.empty()) throw InvalidInput("flow key must not be empty");
  }

  /// Network byte order: src-ip, dst-ip, src-port, dst-port, proto.
  static FlowKey from_five_tuple(const FiveTuple& t) {
    std::string b(kFiveTupleBytes, '\0');
    put_be(b, 0, t.src_ip, 4);
    put_be(b, 4, t.dst_ip, 4);
    put_be(b, 8, t.src_port, 2);
    put_be(b, 10, t.dst_port, 2);
    b[12] = static_cast<char>(t.proto);
    return FlowKey(std::move(b));
  }

  /// Eight little-endian bytes; handy for synthetic workloads.
  static FlowKey from_id(std::uint64_t id) {
    std::string b(8, '\0');
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((id >> (8 * i)) & 0xFF);
    return FlowKey(std::move(b));
  }

  bool is_five_tuple() const noexcept { return bytes_.size() == kFiveTupleBytes; }

  FiveTuple five_tuple() const {
    if (!is_five_tuple()) throw InvalidInput("flow key is not a 5-tuple");
    FiveTuple t;
    t.src_ip = static_cast<std::uint32_t>(get_be(0, 4));
    t.dst_ip = static_cast<std::uint32_t>(get_be(4, 4));
    t.src_port = static_cast<std::uint16_t>(get_be(8, 2));
    t.dst_port = static_cast<std::uint16_t>(get_be(10, 2));
    t.proto = static_cast<std::uint8_t>(bytes_[12]);
    return t;
  }

  std::string_view bytes() const noexcept { return bytes_; }
  std::size_t size() const noexcept { return bytes_.size(); }

  std::uint64_t hash(std::uint64_t seed) const noexcept { return hash_bytes(bytes_, seed); }

  friend bool operator==(const FlowKey&, const FlowKey&) = default;
  friend auto operator<=>(const FlowKey&, const FlowKey&) = default;

 private:
  static void put_be(std::string& b, std::size_t at, std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) {
      b[at + static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * (width - 1 - i))) & 0xFF);
    }
  }

  std::uint64_t get_be(std::size_t at, int width) const {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v = (v << 8) | static_cast<unsigned char>(bytes_[at + static_cast<std::size_t>(i)]);
    }
    return v;
  }

  std::string bytes_;
};

inline std::string format_ipv4(std::uint32_t ip) {
  return std::to_string(ip >> 24) + '.' + std::to_string((ip >> 16) & 0xFF) + '.' + std::to_string((ip >> 8) & 0xFF) +
         '.' + std::to_string(ip & 0xFF);
}

/// Parses dotted-quad IPv4; throws InvalidInput on anything else.
inline std::uint32_t parse_ipv4(std::string_view text) {
  std::uint32_t ip = 0;
  int parts = 0;
  std::size_t pos = 0;
  while (parts < 4) {
    std::size_t end = pos;
    std::uint32_t octet = 0;
    while (end < text.size() && text[end] >= '0' && text[end] <= '9' && end - pos < 3) {
      octet = octet * 10 + static_cast<std::uint32_t>(text[end] - '0');
      ++end;
    }
    if (end == pos || octet > 255) throw InvalidInput("bad IPv4 address '" + std::string(text) + "'");
    ip = (ip << 8) | octet;
    ++parts;
    if (parts < 4) {
      if (end >= text.size() || text[end] != '.') throw InvalidInput("bad IPv4 address '" + std::string(text) + "'");
      ++end;
    }
    pos = end;
  }
  if (pos != text.size()) throw InvalidInput("bad IPv4 address '" + std::string(text) + "'");
  return ip;
}

/// Human-readable key: "src:port>dst:port/proto" for 5-tuples, hex otherwise.
inline std::string format_key(const FlowKey& key) {
  if (key.is_five_tuple()) {
    const FiveTuple t = key.five_tuple();
    return format_ipv4(t.src_ip) + ':' + std::to_string(t.src_port) + '>' + format_ipv4(t.dst_ip) + ':' +
           std::to_string(t.dst_port) + '/' + std::to_string(t.proto);
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out = "0x";
  for (unsigned char c : key.bytes()) {
    out += kHex[c >> 4];
    out += kHex[c & 0xF];
  }
  return out;
}

/// Inverse of format_key.
inline FlowKey parse_key(std::string_view text) {
  auto bad = [&] { return InvalidInput("bad flow key '" + std::string(text) + "'"); };
  if (text.starts_with("0x")) {
    const std::string_view hex = text.substr(2);
    if (hex.empty() || hex.size() % 2 != 0) throw bad();
    auto nibble = [&](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw bad();
    };
    std::string bytes;
    for (std::size_t i = 0; i < hex.size(); i += 2) {
      bytes += static_cast<char>(nibble(hex[i]) * 16 + nibble(hex[i + 1]));
    }
    return FlowKey(std::move(bytes));
  }
  const auto gt = text.find('>');
  const auto slash = text.rfind('/');
  if (gt == std::string_view::npos || slash == std::string_view::npos || slash < gt) throw bad();
  auto endpoint = [&](std::string_view ep, std::uint32_t& ip, std::uint16_t& port) {
    const auto colon = ep.rfind(':');
    if (colon == std::string_view::npos) throw bad();
    ip = parse_ipv4(ep.substr(0, colon));
    const auto p = std::stoul(std::string(ep.substr(colon + 1)));
    if (p > 0xFFFF) throw bad();
    port = static_cast<std::uint16_t>(p);
  };
  FiveTuple t;
  try {
    endpoint(text.substr(0, gt), t.src_ip, t.src_port);
    endpoint(text.substr(gt + 1, slash - gt - 1), t.dst_ip, t.dst_port);
    const auto proto = std::stoul(std::string(text.substr(slash + 1)));
    if (proto > 0xFF) throw bad();
    t.proto = static_cast<std::uint8_t>(proto);
  } catch (const std::logic_error&) {
    throw bad();
  }
  return FlowKey::from_five_tuple(t);
}

struct FlowKeyHash {
  std::size_t operator()(const FlowKey& k) const noexcept {
    return static_cast<std::size_t>(k.hash(0x5EEDF00DULL));
  }
};

/// A flow identifier plus a non-negative counter increment.
struct FlowRecord {
  FlowKey key;
  std::uint64_t value = 0;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

/// Deterministic RNG helpers. The standard distributions are
/// implementation-defined, so anything that feeds serialized output goes
/// through these instead.
inline double unit_double(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

template <class Rng>
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = rng();
  __uint128_t m = static_cast<__uint128_t>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = rng();
      m = static_cast<__uint128_t>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace lss
