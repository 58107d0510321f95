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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lss/clustering.hpp"
#include "lss/pipeline/bus.hpp"
#include "lss/pipeline/envelope.hpp"
#include "lss/pipeline/ingest.hpp"
#include "lss/pipeline/sketching.hpp"
#include "lss/pipeline/store.hpp"

namespace lss::pipeline {

inline constexpr const char* kFlowletTopic = "flowlets";
inline constexpr const char* kSketchTopic = "sketches";

struct PipelineConfig {
  /// Ingestion points; packets are spread over them by flow hash.
  std::size_t producers = 4;
  std::size_t ingest_capacity = IngestionStage::kDefaultCapacity;
  WindowConfig window = WindowConfig::flows(10000);
  std::uint32_t m = 1000;
  SketchOptions sketch;
  std::size_t channel_capacity = 256;
  /// Source of arrival timestamps at the query stage.
  std::function<std::int64_t()> clock = [] {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
};

struct PipelineStats {
  std::uint64_t packets = 0;
  std::uint64_t packet_bytes = 0;
  std::uint64_t batches = 0;
  std::uint64_t flowlet_records = 0;
  std::uint64_t flowlet_wire_bytes = 0;
  std::uint64_t envelopes = 0;
  std::uint64_t fifo_violations = 0;
  std::uint64_t early_rotations = 0;

  nlohmann::json to_json() const {
    return {{"packets", packets},
            {"packet_bytes", packet_bytes},
            {"flowlet_batches", batches},
            {"flowlet_records", flowlet_records},
            {"flowlet_wire_bytes", flowlet_wire_bytes},
            {"envelopes", envelopes},
            {"fifo_violations", fifo_violations},
            {"early_rotations", early_rotations}};
  }
};

/// Replays packets through ingestion -> bus -> sketching -> bus -> store,
/// one thread per stage, and returns once everything is stored.
inline PipelineStats run_pipeline(std::span<const Packet> packets, const ClusterModel& model,
                                  const PipelineConfig& cfg, SketchStore& store) {
  if (cfg.producers == 0) throw InvalidInput("at least one ingestion producer is required");
  TopicBus bus(cfg.channel_capacity);
  auto flowlets = bus.subscribe(kFlowletTopic);
  auto sketches = bus.subscribe(kSketchTopic);

  PipelineStats stats;
  std::mutex stats_mu;
  std::vector<std::exception_ptr> errors(cfg.producers + 2);

  // Sketching stage: audits per-producer order, folds records into windows.
  std::thread sketcher([&] {
    try {
      SketchingStage stage(kSketchTopic, model, cfg.m, cfg.window, cfg.sketch);
      std::map<std::string, std::uint64_t> next_seq;
      std::uint64_t violations = 0;
      std::uint64_t out_seq = 0;
      auto emit = [&](SketchEnvelope&& e) {
        auto bytes = std::make_shared<const wire::Bytes>(encode_envelope(e));
        bus.publish(kSketchTopic, Message{"sketching", out_seq++, std::move(bytes)});
      };
      while (auto msg = flowlets->pop()) {
        const FlowletBatch batch = decode_batch(*msg->payload);
        auto it = next_seq.find(batch.source_id);
        if (it != next_seq.end() && batch.sequence < it->second) ++violations;
        next_seq[batch.source_id] = batch.sequence + 1;
        for (const FlowRecord& r : batch.records) {
          for (auto& e : stage.feed(r, batch.emitted_at_ns)) emit(std::move(e));
        }
      }
      if (auto e = stage.flush()) emit(std::move(*e));
      std::lock_guard lock(stats_mu);
      stats.fifo_violations += violations;
      stats.early_rotations = stage.early_rotations();
    } catch (...) {
      errors[cfg.producers] = std::current_exception();
      flowlets->close();
    }
    bus.close(kSketchTopic);
  });

  // Query stage: stamps arrival time and persists.
  std::thread keeper([&] {
    try {
      std::uint64_t stored = 0;
      while (auto msg = sketches->pop()) {
        SketchEnvelope e = decode_envelope(*msg->payload);
        e.arrival_ns = cfg.clock();
        store.put(e);
        ++stored;
      }
      std::lock_guard lock(stats_mu);
      stats.envelopes = stored;
    } catch (...) {
      errors[cfg.producers + 1] = std::current_exception();
      sketches->close();
    }
  });

  std::vector<std::thread> producers;
  for (std::size_t p = 0; p < cfg.producers; ++p) {
    producers.emplace_back([&, p] {
      try {
        IngestionStage stage("ingest-" + std::to_string(p), cfg.ingest_capacity);
        std::uint64_t wire_bytes = 0;
        std::uint64_t published = 0;
        auto publish = [&](const FlowletBatch& b) {
          if (b.records.empty()) return;
          ++published;
          auto bytes = std::make_shared<const wire::Bytes>(encode_batch(b));
          wire_bytes += bytes->size();
          bus.publish(kFlowletTopic, Message{stage.source_id(), b.sequence, std::move(bytes)});
        };
        std::int64_t last_ts = 0;
        for (const Packet& pkt : packets) {
          if (cfg.producers > 1 && pkt.key.hash(0x7077E) % cfg.producers != p) continue;
          last_ts = pkt.ts_ns;
          if (auto b = stage.ingest(pkt)) publish(*b);
        }
        publish(stage.flush(last_ts));
        std::lock_guard lock(stats_mu);
        stats.packets += stage.packets();
        stats.packet_bytes += stage.bytes();
        stats.batches += published;
        stats.flowlet_records += stage.records();
        stats.flowlet_wire_bytes += wire_bytes;
      } catch (...) {
        errors[p] = std::current_exception();
      }
    });
  }
  for (auto& t : producers) t.join();
  bus.close(kFlowletTopic);
  sketcher.join();
  keeper.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return stats;
}

}  // namespace lss::pipeline
