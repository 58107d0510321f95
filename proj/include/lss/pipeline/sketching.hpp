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

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lss/clustering.hpp"
#include "lss/common.hpp"
#include "lss/pipeline/envelope.hpp"
#include "lss/sketch.hpp"

namespace lss::pipeline {

struct WindowConfig {
  enum class Mode { sequence, time };

  Mode mode = Mode::sequence;
  /// Distinct flows per window (sequence mode).
  std::uint64_t capacity = 10000;
  /// Window length in nanoseconds (time mode).
  std::int64_t duration_ns = 0;

  static WindowConfig flows(std::uint64_t n) { return {Mode::sequence, n, 0}; }
  static WindowConfig time(std::int64_t duration_ns) { return {Mode::time, 0, duration_ns}; }

  void validate() const {
    if (mode == Mode::sequence && capacity == 0) throw InvalidInput("window capacity must be positive");
    if (mode == Mode::time && duration_ns <= 0) throw InvalidInput("window duration must be positive");
  }
};

/// Maintains one open LSS window and turns closed windows into envelopes.
///
/// Sequence windows close as soon as they hold N distinct flows. Time windows
/// sit on a grid of `duration_ns` starting at zero and close when the first
/// record past the boundary arrives (or on flush); a record older than the
/// open window is folded into it. If the membership table fills up or a
/// fingerprint collision makes a relocation inconsistent, the window is closed
/// early and the record goes into a fresh one.
class SketchingStage {
 public:
  using Logger = std::function<void(const std::string&)>;

  SketchingStage(std::string source_topic, ClusterModel model, std::uint32_t m, WindowConfig window,
                 SketchOptions opts = {})
      : source_topic_(std::move(source_topic)), model_(std::move(model)), m_(m), window_(window), opts_(opts) {
    window_.validate();
    if (window_.mode == WindowConfig::Mode::sequence && opts_.expected_flows == 0) {
      opts_.expected_flows = window_.capacity;
    }
    logger_ = [](const std::string& msg) { std::clog << "[sketching] " << msg << '\n'; };
    open(0);
  }

  void set_logger(Logger logger) { logger_ = std::move(logger); }

  std::vector<SketchEnvelope> feed(const FlowRecord& record, std::int64_t ts_ns) {
    std::vector<SketchEnvelope> out;
    if (window_.mode == WindowConfig::Mode::time) {
      if (!started_) {
        align(ts_ns);
      } else if (ts_ns >= end_ns_) {
        if (distinct() > 0) out.push_back(close(end_ns_));
        align(ts_ns);
      }
    } else if (distinct() == 0) {
      start_ns_ = ts_ns;
      last_ns_ = ts_ns;
    }
    started_ = true;
    last_ns_ = std::max(last_ns_, ts_ns);

    try {
      sketch_->insert_duplicate(record.key, record.value);
    } catch (const CapacityError& e) {
      rotate_early(record, ts_ns, e.what(), out);
    } catch (const ConsistencyError& e) {
      rotate_early(record, ts_ns, e.what(), out);
    }

    if (window_.mode == WindowConfig::Mode::sequence && distinct() >= window_.capacity) {
      out.push_back(close(last_ns_));
    }
    return out;
  }

  /// Closes the open window if it holds anything.
  std::optional<SketchEnvelope> flush() {
    if (distinct() == 0) return std::nullopt;
    return close(window_.mode == WindowConfig::Mode::time ? end_ns_ : last_ns_);
  }

  const LssSketch& current() const noexcept { return *sketch_; }
  std::uint64_t windows_emitted() const noexcept { return next_window_id_; }
  std::uint64_t early_rotations() const noexcept { return early_rotations_; }
  const std::string& source_topic() const noexcept { return source_topic_; }

 private:
  std::size_t distinct() const noexcept { return sketch_->membership().size(); }

  void open(std::int64_t start_ns) {
    sketch_.emplace(model_, m_, opts_);
    start_ns_ = start_ns;
    last_ns_ = start_ns;
  }

  void align(std::int64_t ts_ns) {
    const std::int64_t d = window_.duration_ns;
    std::int64_t slot = ts_ns / d;
    if (ts_ns < 0 && ts_ns % d != 0) --slot;
    if (!started_ || slot * d != start_ns_) open(slot * d);
    end_ns_ = slot * d + d;
  }

  SketchEnvelope close(std::int64_t end_ns) {
    sketch_->close();
    SketchEnvelope e;
    e.source_topic = source_topic_;
    e.window_id = next_window_id_++;
    e.window_start_ns = start_ns_;
    e.window_end_ns = end_ns;
    e.sketch = sketch_->serialize(true);
    const std::int64_t next_start = window_.mode == WindowConfig::Mode::time ? end_ns : last_ns_;
    const std::int64_t keep_end = end_ns_;
    open(next_start);
    end_ns_ = keep_end;
    return e;
  }

  void rotate_early(const FlowRecord& record, std::int64_t ts_ns, const char* why, std::vector<SketchEnvelope>& out) {
    if (distinct() == 0) throw CapacityError(std::string("cannot place record in an empty window: ") + why);
    ++early_rotations_;
    logger_("early window rotation after " + std::to_string(distinct()) + " flows: " + why);
    out.push_back(close(ts_ns));
    start_ns_ = ts_ns;
    sketch_->insert_duplicate(record.key, record.value);
  }

  std::string source_topic_;
  ClusterModel model_;
  std::uint32_t m_;
  WindowConfig window_;
  SketchOptions opts_;
  Logger logger_;
  std::optional<LssSketch> sketch_;
  bool started_ = false;
  std::int64_t start_ns_ = 0;
  std::int64_t end_ns_ = 0;
  std::int64_t last_ns_ = 0;
  std::uint64_t next_window_id_ = 0;
  std::uint64_t early_rotations_ = 0;
};

}  // namespace lss::pipeline
