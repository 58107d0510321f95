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
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lss/common.hpp"
#include "lss/pipeline/envelope.hpp"
#include "lss/pipeline/store.hpp"
#include "lss/sketch.hpp"

namespace lss::pipeline {

enum class QueryTask { flow_size, entropy, heavy_hitters, cardinality, heavy_changes };

inline QueryTask parse_task(std::string_view name) {
  if (name == "flow-size") return QueryTask::flow_size;
  if (name == "entropy") return QueryTask::entropy;
  if (name == "heavy-hitters") return QueryTask::heavy_hitters;
  if (name == "cardinality") return QueryTask::cardinality;
  if (name == "heavy-changes") return QueryTask::heavy_changes;
  throw InvalidInput("unknown query task '" + std::string(name) + "'");
}

inline std::string task_name(QueryTask t) {
  switch (t) {
    case QueryTask::flow_size: return "flow-size";
    case QueryTask::entropy: return "entropy";
    case QueryTask::heavy_hitters: return "heavy-hitters";
    case QueryTask::cardinality: return "cardinality";
    case QueryTask::heavy_changes: return "heavy-changes";
  }
  return "?";
}

struct QueryParams {
  /// Flows of interest. Sketches do not store keys, so key-level tasks
  /// (flow-size, heavy-hitters, heavy-changes) need them; entropy uses them
  /// when given and the bucket contents otherwise.
  std::vector<FlowKey> keys;
  double threshold = 0.0;
};

namespace detail {

inline nlohmann::json window_ref(const SketchEnvelope& e) {
  return {{"source", e.source_topic},
          {"window_id", e.window_id},
          {"window_start_ns", e.window_start_ns},
          {"window_end_ns", e.window_end_ns},
          {"arrival_ns", e.arrival_ns}};
}

inline void require_keys(const QueryParams& p, QueryTask t) {
  if (p.keys.empty()) throw InvalidInput(task_name(t) + " query needs at least one key");
}

}  // namespace detail

/// Evaluates one task over every sketch that arrived in [t0, t1].
/// Flow sizes are reported per window; heavy hitters are the union over
/// windows with every window's estimate; cardinalities are summed; entropy is
/// reported per window; heavy changes compare consecutive windows of a source.
inline nlohmann::json network_wide_query(const std::vector<SketchEnvelope>& envelopes, QueryTask task,
                                         const QueryParams& params) {
  using nlohmann::json;
  std::vector<LssSketch> sketches;
  sketches.reserve(envelopes.size());
  for (const auto& e : envelopes) sketches.push_back(e.decode_sketch());

  json report{{"task", task_name(task)}, {"windows", envelopes.size()}};
  switch (task) {
    case QueryTask::flow_size: {
      detail::require_keys(params, task);
      json flows = json::array();
      for (const FlowKey& k : params.keys) {
        json est = json::array();
        for (std::size_t i = 0; i < sketches.size(); ++i) {
          if (auto v = sketches[i].try_query(k)) {
            json row = detail::window_ref(envelopes[i]);
            row["estimate"] = *v;
            est.push_back(std::move(row));
          }
        }
        flows.push_back({{"key", format_key(k)}, {"estimates", std::move(est)}});
      }
      report["flows"] = std::move(flows);
      break;
    }
    case QueryTask::entropy: {
      json rows = json::array();
      for (std::size_t i = 0; i < sketches.size(); ++i) {
        std::vector<double> sizes;
        if (params.keys.empty()) {
          sizes = sketches[i].inserted_size_distribution();
        } else {
          for (const FlowKey& k : params.keys) {
            if (auto v = sketches[i].try_query(k)) sizes.push_back(*v);
          }
        }
        json row = detail::window_ref(envelopes[i]);
        row["flows"] = sizes.size();
        row["entropy"] = sizes.empty() ? 0.0 : size_entropy(sizes);
        rows.push_back(std::move(row));
      }
      report["per_window"] = std::move(rows);
      break;
    }
    case QueryTask::heavy_hitters: {
      detail::require_keys(params, task);
      if (params.threshold < 0.0) throw InvalidInput("heavy-hitter threshold must be non-negative");
      std::map<FlowKey, std::pair<double, json>> hits;
      for (std::size_t i = 0; i < sketches.size(); ++i) {
        for (const FlowKey& k : params.keys) {
          const auto v = sketches[i].try_query(k);
          if (!v || *v <= params.threshold) continue;
          auto& [best, list] = hits[k];
          if (list.is_null()) list = json::array();
          best = std::max(best, *v);
          json row = detail::window_ref(envelopes[i]);
          row["estimate"] = *v;
          list.push_back(std::move(row));
        }
      }
      std::vector<std::pair<FlowKey, std::pair<double, json>>> sorted(hits.begin(), hits.end());
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.second.first > b.second.first; });
      json out = json::array();
      for (auto& [k, v] : sorted) out.push_back({{"key", format_key(k)}, {"estimates", std::move(v.second)}});
      report["threshold"] = params.threshold;
      report["heavy_hitters"] = std::move(out);
      break;
    }
    case QueryTask::cardinality: {
      json rows = json::array();
      std::uint64_t total = 0;
      for (std::size_t i = 0; i < sketches.size(); ++i) {
        const std::uint64_t c = sketches[i].cardinality();
        total += c;
        json row = detail::window_ref(envelopes[i]);
        row["cardinality"] = c;
        rows.push_back(std::move(row));
      }
      report["per_window"] = std::move(rows);
      report["total"] = total;
      break;
    }
    case QueryTask::heavy_changes: {
      detail::require_keys(params, task);
      std::map<std::string, std::vector<std::size_t>> by_source;
      for (std::size_t i = 0; i < envelopes.size(); ++i) by_source[envelopes[i].source_topic].push_back(i);
      json pairs = json::array();
      for (auto& [source, idx] : by_source) {
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return envelopes[a].window_id < envelopes[b].window_id; });
        for (std::size_t j = 1; j < idx.size(); ++j) {
          const auto changed = heavy_changes(sketches[idx[j - 1]], sketches[idx[j]], params.keys, params.threshold);
          json keys = json::array();
          for (const FlowKey& k : changed) keys.push_back(format_key(k));
          pairs.push_back({{"source", source},
                           {"from_window", envelopes[idx[j - 1]].window_id},
                           {"to_window", envelopes[idx[j]].window_id},
                           {"changed", std::move(keys)}});
        }
      }
      report["threshold"] = params.threshold;
      report["pairs"] = std::move(pairs);
      break;
    }
  }
  return report;
}

inline nlohmann::json network_wide_query(const SketchStore& store, std::int64_t t0, std::int64_t t1, QueryTask task,
                                         const QueryParams& params) {
  auto report = network_wide_query(store.range(t0, t1), task, params);
  report["range"] = {t0, t1};
  return report;
}

}  // namespace lss::pipeline
