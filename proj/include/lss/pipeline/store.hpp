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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "lss/common.hpp"
#include "lss/pipeline/envelope.hpp"

namespace lss::pipeline {

/// Directory-backed envelope store. Each envelope lives in its own file named
/// after (source, window id); `index.tsv` is an append-only log of
/// "arrival_ns<TAB>file" lines. Writes are serialized, reads run concurrently.
class SketchStore {
 public:
  using Warn = std::function<void(const std::string&)>;

  explicit SketchStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    warn_ = [](const std::string& msg) { std::clog << "[store] warning: " << msg << '\n'; };
    load_index();
  }

  void set_warning_handler(Warn warn) { warn_ = std::move(warn); }

  void put(const SketchEnvelope& e) {
    const std::string name = file_name(e.source_topic, e.window_id);
    const wire::Bytes bytes = encode_envelope(e);
    std::unique_lock lock(mu_);
    const auto tmp = dir_ / (name + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      out.flush();
      if (!out) throw std::ios_base::failure("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, dir_ / name);
    std::ofstream index(dir_ / "index.tsv", std::ios::app);
    index << e.arrival_ns << '\t' << name << '\n';
    index.flush();
    if (!index) throw std::ios_base::failure("cannot append to " + (dir_ / "index.tsv").string());
    entries_[name] = e.arrival_ns;
  }

  /// Envelopes with arrival in [t0, t1], ordered by arrival then file name.
  /// Unreadable or corrupt envelopes are skipped with a warning.
  std::vector<SketchEnvelope> range(std::int64_t t0, std::int64_t t1) const {
    if (t0 > t1) throw InvalidInput("range start after range end");
    std::vector<std::pair<std::int64_t, std::string>> hits;
    {
      std::shared_lock lock(mu_);
      for (const auto& [name, ts] : entries_) {
        if (ts >= t0 && ts <= t1) hits.emplace_back(ts, name);
      }
    }
    std::sort(hits.begin(), hits.end());
    std::vector<SketchEnvelope> out;
    for (const auto& [ts, name] : hits) {
      std::ifstream in(dir_ / name, std::ios::binary);
      if (!in) {
        warn_("missing envelope file " + name);
        continue;
      }
      const wire::Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      try {
        out.push_back(decode_envelope(bytes));
      } catch (const DecodeError& err) {
        warn_("skipping corrupt envelope " + name + ": " + err.what() + " at byte " + std::to_string(err.offset()));
      }
    }
    return out;
  }

  std::vector<SketchEnvelope> all() const {
    return range(std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max());
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return entries_.size();
  }

  const std::filesystem::path& directory() const noexcept { return dir_; }

  static std::string file_name(const std::string& source, std::uint64_t window_id) {
    std::string safe;
    for (char c : source) {
      const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
      safe += ok ? c : '_';
    }
    // Disambiguate sources that sanitize to the same text.
    std::ostringstream os;
    os << safe << '-' << std::hex << (hash_bytes(source, 0x570E) & 0xFFFFFFFF) << std::dec << '-' << window_id << ".env";
    return os.str();
  }

 private:
  void load_index() {
    std::ifstream in(dir_ / "index.tsv");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) {
        warn_("index.tsv line " + std::to_string(line_no) + " is malformed");
        continue;
      }
      try {
        entries_[line.substr(tab + 1)] = std::stoll(line.substr(0, tab));
      } catch (const std::logic_error&) {
        warn_("index.tsv line " + std::to_string(line_no) + " has a bad timestamp");
      }
    }
  }

  std::filesystem::path dir_;
  Warn warn_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::int64_t> entries_;
};

}  // namespace lss::pipeline
