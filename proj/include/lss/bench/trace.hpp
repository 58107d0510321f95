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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "lss/common.hpp"
#include "lss/pipeline/ingest.hpp"

namespace lss::bench {

using pipeline::Packet;

inline constexpr std::string_view kTraceHeader = "ts_ns,src_ip,dst_ip,src_port,dst_port,proto,bytes";

/// Truncated Zipf over {1, ..., max_value}: P(x) proportional to x^-s.
class ZipfSampler {
 public:
  ZipfSampler(double s, std::uint64_t max_value) : s_(s) {
    if (!(s > 0.0)) throw InvalidInput("zipf exponent must be positive");
    if (max_value == 0) throw InvalidInput("zipf support must be non-empty");
    cdf_.reserve(max_value);
    double acc = 0.0;
    for (std::uint64_t x = 1; x <= max_value; ++x) {
      acc += std::pow(static_cast<double>(x), -s);
      cdf_.push_back(acc);
    }
    for (double& c : cdf_) c /= acc;
  }

  /// Smallest support bound whose mean reaches `target_mean` (capped at `cap`).
  static std::uint64_t support_for_mean(double s, double target_mean, std::uint64_t cap = 10'000'000) {
    if (target_mean <= 1.0) return 1;
    double w = 0.0;
    double wx = 0.0;
    for (std::uint64_t x = 1; x <= cap; ++x) {
      const double p = std::pow(static_cast<double>(x), -s);
      w += p;
      wx += p * static_cast<double>(x);
      if (wx / w >= target_mean) return x;
    }
    return cap;
  }

  template <class Rng>
  std::uint64_t operator()(Rng& rng) const {
    const double u = unit_double(rng());
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1)) + 1;
  }

  double exponent() const noexcept { return s_; }
  std::uint64_t max_value() const noexcept { return cdf_.size(); }

  double mean() const {
    double prev = 0.0;
    double m = 0.0;
    for (std::size_t i = 0; i < cdf_.size(); ++i) {
      m += static_cast<double>(i + 1) * (cdf_[i] - prev);
      prev = cdf_[i];
    }
    return m;
  }

 private:
  double s_;
  std::vector<double> cdf_;
};

struct GenOptions {
  std::uint64_t seed = 1;
  std::size_t n_flows = 10000;
  double zipf_s = 1.1;
  /// Target mean packets per flow; picks the Zipf support bound.
  double mean_packets = 20.0;
  std::uint64_t packet_bytes = 1000;
  /// Flows transmitting at once; their packets interleave.
  std::size_t concurrency = 100;
  std::int64_t packet_gap_ns = 1000;
};

/// Per-flow packet counts of a generated trace, in flow order.
inline std::vector<std::uint64_t> generate_flow_sizes(const GenOptions& o) {
  if (o.n_flows == 0) throw InvalidInput("trace needs at least one flow");
  const ZipfSampler zipf(o.zipf_s, ZipfSampler::support_for_mean(o.zipf_s, o.mean_packets));
  std::mt19937_64 rng(mix64(o.seed ^ 0x5A1F));
  std::vector<std::uint64_t> sizes(o.n_flows);
  for (auto& s : sizes) s = zipf(rng);
  return sizes;
}

/// Deterministic synthetic trace: Zipf flow sizes, distinct random 5-tuples,
/// packets of concurrently active flows interleaved at random.
inline std::vector<Packet> generate_trace(const GenOptions& o) {
  if (o.packet_bytes == 0) throw InvalidInput("packet size must be positive");
  if (o.concurrency == 0) throw InvalidInput("concurrency must be positive");
  const auto sizes = generate_flow_sizes(o);
  std::mt19937_64 rng(mix64(o.seed ^ 0x7EA5E));

  std::vector<FlowKey> keys;
  keys.reserve(sizes.size());
  std::unordered_set<FlowKey, FlowKeyHash> seen;
  while (keys.size() < sizes.size()) {
    FiveTuple t;
    const std::uint64_t a = rng();
    const std::uint64_t b = rng();
    t.src_ip = 0x0A000000U | static_cast<std::uint32_t>(a & 0xFFFFFF);
    t.dst_ip = 0xC0A80000U | static_cast<std::uint32_t>((a >> 24) & 0xFFFF);
    t.src_port = static_cast<std::uint16_t>(1024 + (b & 0xFFFF) % 64512);
    t.dst_port = static_cast<std::uint16_t>((b >> 16) & 1 ? 443 : 80);
    t.proto = (b >> 17) & 3 ? 6 : 17;
    FlowKey k = FlowKey::from_five_tuple(t);
    if (seen.insert(k).second) keys.push_back(std::move(k));
  }

  std::uint64_t total = 0;
  for (auto s : sizes) total += s;
  std::vector<Packet> out;
  out.reserve(total);
  std::vector<std::pair<std::size_t, std::uint64_t>> active;
  std::size_t next = 0;
  while (next < sizes.size() && active.size() < o.concurrency) {
    active.emplace_back(next, sizes[next]);
    ++next;
  }
  std::int64_t ts = 0;
  while (!active.empty()) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, active.size()));
    out.push_back({keys[active[j].first], o.packet_bytes, ts});
    ts += o.packet_gap_ns;
    if (--active[j].second == 0) {
      if (next < sizes.size()) {
        active[j] = {next, sizes[next]};
        ++next;
      } else {
        active[j] = active.back();
        active.pop_back();
      }
    }
  }
  return out;
}

class TraceParseError : public InvalidInput {
 public:
  TraceParseError(const std::string& what, std::size_t line)
      : InvalidInput("trace line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline void write_trace_csv(std::ostream& out, const std::vector<Packet>& packets) {
  out << kTraceHeader << '\n';
  for (const Packet& p : packets) {
    const FiveTuple t = p.key.five_tuple();
    out << p.ts_ns << ',' << format_ipv4(t.src_ip) << ',' << format_ipv4(t.dst_ip) << ',' << t.src_port << ','
        << t.dst_port << ',' << static_cast<unsigned>(t.proto) << ',' << p.size_bytes << '\n';
  }
}

inline void write_trace_csv(const std::filesystem::path& path, const std::vector<Packet>& packets) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  write_trace_csv(out, packets);
  out.flush();
  if (!out) throw std::ios_base::failure("write to " + path.string() + " failed");
}

inline std::vector<Packet> read_trace_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw TraceParseError("missing header", line_no);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw TraceParseError("expected header '" + std::string(kTraceHeader) + "'", line_no);

  std::vector<Packet> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string_view rest(line);
    std::string_view f[7];
    for (int i = 0; i < 7; ++i) {
      const auto comma = rest.find(',');
      if ((comma == std::string_view::npos) != (i == 6)) throw TraceParseError("expected 7 fields", line_no);
      f[i] = rest.substr(0, comma);
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
    auto num = [&](std::string_view s, std::uint64_t max, const char* what) -> std::uint64_t {
      std::uint64_t v = 0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || p != s.data() + s.size() || v > max) {
        throw TraceParseError(std::string("bad ") + what + " '" + std::string(s) + "'", line_no);
      }
      return v;
    };
    FiveTuple t;
    try {
      t.src_ip = parse_ipv4(f[1]);
      t.dst_ip = parse_ipv4(f[2]);
    } catch (const InvalidInput& e) {
      throw TraceParseError(e.what(), line_no);
    }
    std::int64_t ts = 0;
    const auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), ts);
    if (ec != std::errc{} || p != f[0].data() + f[0].size()) throw TraceParseError("bad ts_ns", line_no);
    t.src_port = static_cast<std::uint16_t>(num(f[3], 0xFFFF, "src_port"));
    t.dst_port = static_cast<std::uint16_t>(num(f[4], 0xFFFF, "dst_port"));
    t.proto = static_cast<std::uint8_t>(num(f[5], 0xFF, "proto"));
    const std::uint64_t bytes = num(f[6], UINT64_MAX, "bytes");
    if (bytes == 0) throw TraceParseError("packet size must be positive", line_no);
    out.push_back({FlowKey::from_five_tuple(t), bytes, ts});
  }
  return out;
}

inline std::vector<Packet> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open trace " + path.string());
  return read_trace_csv(in);
}

}  // namespace lss::bench
