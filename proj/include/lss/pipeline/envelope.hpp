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
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include "lss/common.hpp"
#include "lss/sketch.hpp"
#include "lss/wire.hpp"

namespace lss::pipeline {

/// A closed window's sketch (with squeezed membership) plus its metadata.
struct SketchEnvelope {
  std::string source_topic;
  std::uint64_t window_id = 0;
  std::int64_t window_start_ns = 0;
  std::int64_t window_end_ns = 0;
  std::int64_t arrival_ns = 0;
  wire::Bytes sketch;

  LssSketch decode_sketch() const { return LssSketch::deserialize(sketch); }

  friend bool operator==(const SketchEnvelope&, const SketchEnvelope&) = default;
};

inline constexpr std::array<std::uint8_t, 4> kEnvelopeMagic{'L', 'S', 'S', 'E'};
inline constexpr std::uint16_t kEnvelopeVersion = 1;

inline wire::Bytes encode_envelope(const SketchEnvelope& e) {
  wire::Writer w;
  w.raw(kEnvelopeMagic);
  w.u16(kEnvelopeVersion);
  w.str16(e.source_topic);
  w.u64(e.window_id);
  w.i64(e.window_start_ns);
  w.i64(e.window_end_ns);
  w.i64(e.arrival_ns);
  w.u32(static_cast<std::uint32_t>(e.sketch.size()));
  w.raw(e.sketch);
  return std::move(w).take();
}

/// Decodes and validates: the payload must itself decode to a sketch.
inline SketchEnvelope decode_envelope(std::span<const std::uint8_t> bytes) {
  wire::Reader r(bytes);
  r.expect_magic(kEnvelopeMagic);
  if (r.u16() != kEnvelopeVersion) r.fail("unsupported envelope version");
  SketchEnvelope e;
  e.source_topic = r.str16();
  e.window_id = r.u64();
  e.window_start_ns = r.i64();
  e.window_end_ns = r.i64();
  e.arrival_ns = r.i64();
  const std::size_t payload_at = r.offset();
  const std::uint32_t n = r.u32();
  auto payload = r.raw(n);
  r.expect_end();
  e.sketch.assign(payload.begin(), payload.end());
  try {
    (void)LssSketch::deserialize(e.sketch);
  } catch (const DecodeError& err) {
    throw DecodeError(std::string("envelope payload: ") + err.what(), payload_at + 4 + err.offset());
  }
  return e;
}

// Length-prefixed framing (u32 little-endian length, then the bytes) for
// carrying envelopes or batches over files and sockets.

inline void write_frame(std::ostream& out, std::span<const std::uint8_t> bytes) {
  if (bytes.size() > 0xFFFFFFFFULL) throw InvalidInput("frame too large");
  std::array<char, 4> len{};
  for (int i = 0; i < 4; ++i) len[static_cast<std::size_t>(i)] = static_cast<char>((bytes.size() >> (8 * i)) & 0xFF);
  out.write(len.data(), 4);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::ios_base::failure("frame write failed");
}

/// Next frame, or nullopt at a clean end of stream. A partial frame is an error.
inline std::optional<wire::Bytes> read_frame(std::istream& in) {
  std::array<unsigned char, 4> len{};
  in.read(reinterpret_cast<char*>(len.data()), 4);
  if (in.gcount() == 0 && in.eof()) return std::nullopt;
  if (in.gcount() != 4) throw DecodeError("truncated frame length", 0);
  std::uint32_t n = 0;
  for (int i = 3; i >= 0; --i) n = (n << 8) | len[static_cast<std::size_t>(i)];
  wire::Bytes out(n);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::uint32_t>(in.gcount()) != n) throw DecodeError("truncated frame body", 4);
  return out;
}

}  // namespace lss::pipeline
