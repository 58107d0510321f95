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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lss/baselines.hpp"
#include "lss/bench/metrics.hpp"
#include "lss/bench/trace.hpp"
#include "lss/clustering.hpp"
#include "lss/sketch.hpp"

namespace lss::bench {

enum class SketchKind { lss, cm, cs };
enum class ValueUnit { packets, bytes };

inline std::string kind_name(SketchKind k) {
  switch (k) {
    case SketchKind::lss: return "lss";
    case SketchKind::cm: return "cm";
    case SketchKind::cs: return "cs";
  }
  return "?";
}

inline SketchKind parse_kind(std::string_view s) {
  if (s == "lss") return SketchKind::lss;
  if (s == "cm") return SketchKind::cm;
  if (s == "cs") return SketchKind::cs;
  throw InvalidInput("unknown sketch kind '" + std::string(s) + "'");
}

inline ValueUnit parse_unit(std::string_view s) {
  if (s == "packets") return ValueUnit::packets;
  if (s == "bytes") return ValueUnit::bytes;
  throw InvalidInput("unknown value unit '" + std::string(s) + "'");
}

struct TraceSource {
  /// Replay this CSV file; otherwise generate with `gen` (its seed is
  /// replaced by each benchmark seed).
  std::optional<std::filesystem::path> file;
  GenOptions gen;
};

struct BenchmarkConfig {
  std::vector<SketchKind> kinds{SketchKind::lss, SketchKind::cm, SketchKind::cs};
  std::vector<double> ratios{0.1};
  std::size_t window = 10000;
  std::size_t clusters = 30;
  double hh_percentile = 90.0;
  int counter_width = 32;
  std::vector<std::uint64_t> seeds{1};
  TraceSource trace;
  std::size_t train_samples = 10000;
  std::size_t banks = kDefaultBanks;
  AllocationPolicy policy;
  ValueUnit unit = ValueUnit::packets;
  /// Charge the squeezed membership table to LSS's budget.
  bool include_membership = true;
  /// Wall-clock throughput in the report; makes it non-deterministic.
  bool timing = false;
  /// Include per-window metrics in the report.
  bool per_window = false;
  /// 0 means every window of the trace.
  std::size_t max_windows = 0;
  /// Seeds evaluated concurrently; results merge in seed order.
  std::size_t threads = 1;

  void validate() const {
    if (kinds.empty()) throw InvalidInput("at least one sketch kind is required");
    if (ratios.empty()) throw InvalidInput("at least one m/N ratio is required");
    for (double r : ratios) {
      if (!(r > 0.0 && r <= 1.0)) throw InvalidInput("m/N ratios must lie in (0, 1]");
    }
    if (window == 0) throw InvalidInput("window size must be positive");
    if (clusters == 0 || clusters > kMaxClusters) throw InvalidInput("clusters must be in [1, 256]");
    if (!(hh_percentile > 0.0 && hh_percentile < 100.0)) throw InvalidInput("percentile must be in (0, 100)");
    if (!lss::detail::valid_counter_width(counter_width)) throw InvalidInput("counter width must be 8, 16, 32 or 64");
    if (seeds.empty()) throw InvalidInput("at least one seed is required");
    if (train_samples == 0) throw InvalidInput("training needs at least one sample");
    if (banks == 0) throw InvalidInput("banks must be positive");
    if (threads == 0) throw InvalidInput("threads must be positive");
  }

  nlohmann::json to_json() const {
    nlohmann::json kj = nlohmann::json::array();
    for (auto k : kinds) kj.push_back(kind_name(k));
    nlohmann::json t;
    if (trace.file) {
      t = {{"file", trace.file->string()}};
    } else {
      t = {{"generated",
            {{"flows", trace.gen.n_flows},
             {"zipf_s", trace.gen.zipf_s},
             {"mean_packets", trace.gen.mean_packets},
             {"packet_bytes", trace.gen.packet_bytes},
             {"concurrency", trace.gen.concurrency}}}};
    }
    return {{"kinds", kj},
            {"ratios", ratios},
            {"window", window},
            {"clusters", clusters},
            {"hh_percentile", hh_percentile},
            {"counter_width", counter_width},
            {"seeds", seeds},
            {"trace", t},
            {"train_samples", train_samples},
            {"banks", banks},
            {"policy", {{"entropy", policy.use_entropy}, {"center", policy.use_center}, {"density", policy.use_density}}},
            {"unit", unit == ValueUnit::packets ? "packets" : "bytes"},
            {"include_membership", include_membership}};
  }
};

/// One window of the replayed trace with its exact ground truth.
struct Window {
  std::vector<FlowRecord> records;   // one per packet, in arrival order
  std::vector<FlowKey> keys;         // distinct flows, first-arrival order
  std::vector<std::uint64_t> truth;  // exact totals, aligned with keys
};

/// Cuts the packet stream into windows of `n` distinct flows. A window closes
/// when the (n+1)-th distinct flow arrives; totals come from an exact hash map.
inline std::vector<Window> split_windows(const std::vector<Packet>& packets, std::size_t n, ValueUnit unit,
                                         std::size_t max_windows = 0) {
  std::vector<Window> out;
  std::unordered_map<FlowKey, std::size_t, FlowKeyHash> index;
  Window cur;
  for (const Packet& p : packets) {
    const std::uint64_t v = unit == ValueUnit::packets ? 1 : p.size_bytes;
    auto it = index.find(p.key);
    if (it == index.end()) {
      if (cur.keys.size() == n) {
        out.push_back(std::move(cur));
        cur = Window{};
        index.clear();
        if (max_windows && out.size() == max_windows) return out;
      }
      it = index.emplace(p.key, cur.keys.size()).first;
      cur.keys.push_back(p.key);
      cur.truth.push_back(0);
    }
    cur.truth[it->second] += v;
    cur.records.push_back({p.key, v});
  }
  if (!cur.keys.empty() && !(max_windows && out.size() == max_windows)) out.push_back(std::move(cur));
  return out;
}

/// Totals of the first `n` distinct flows of the trace (first-arrival order).
inline std::vector<double> training_samples(const std::vector<Packet>& packets, std::size_t n, ValueUnit unit) {
  std::unordered_map<FlowKey, std::size_t, FlowKeyHash> index;
  std::vector<double> totals;
  for (const Packet& p : packets) {
    auto it = index.find(p.key);
    if (it == index.end()) {
      if (totals.size() == n) continue;
      it = index.emplace(p.key, totals.size()).first;
      totals.push_back(0.0);
    }
    totals[it->second] += unit == ValueUnit::packets ? 1.0 : static_cast<double>(p.size_bytes);
  }
  return totals;
}

/// Result of one sketch kind over one window.
struct WindowEval {
  std::vector<double> rel_errors;
  double entropy_true = 0.0;
  double entropy_est = 0.0;
  Confusion hh;
  std::uint64_t card_true = 0;
  /// Equals card_true for sketches that cannot count flows.
  std::uint64_t card_est = 0;
  std::uint64_t insert_failures = 0;
  double insert_seconds = 0.0;
  double query_seconds = 0.0;
  std::size_t records = 0;
};

struct Budget {
  std::uint32_t lss_buckets = 0;
  std::size_t clusters = 0;
  std::size_t sketch_bytes = 0;
  std::size_t membership_bytes = 0;
  std::size_t counters_per_bank = 0;
  std::size_t baseline_bytes = 0;
  /// Whether the membership table counts toward the LSS side.
  bool membership_charged = true;

  std::size_t charged_bytes() const { return lss_bytes(membership_charged); }

  std::size_t lss_bytes(bool with_membership) const {
    return sketch_bytes + (with_membership ? membership_bytes : 0);
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class Estimator>
void score(WindowEval& ev, const Window& w, double threshold, Estimator&& estimate) {
  std::vector<double> est(w.keys.size());
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < w.keys.size(); ++i) est[i] = estimate(w.keys[i]);
  ev.query_seconds = seconds_since(t0);

  std::vector<double> truth(w.truth.begin(), w.truth.end());
  ev.rel_errors.reserve(w.keys.size());
  std::vector<std::size_t> t_hh;
  std::vector<std::size_t> p_hh;
  for (std::size_t i = 0; i < w.keys.size(); ++i) {
    ev.rel_errors.push_back(relative_error(truth[i], est[i]));
    if (truth[i] > threshold) t_hh.push_back(i);
    if (est[i] > threshold) p_hh.push_back(i);
  }
  ev.hh = confusion<std::size_t>(t_hh, p_hh);
  ev.entropy_true = size_entropy(truth);
  ev.entropy_est = size_entropy(est);
  ev.card_true = w.keys.size();
  ev.card_est = ev.card_true;
}

}  // namespace detail

inline WindowEval evaluate_lss(const Window& w, const ClusterModel& model, std::uint32_t m, const SketchOptions& opts,
                               double threshold) {
  WindowEval ev;
  LssSketch sk(model, m, opts);
  const auto t0 = detail::Clock::now();
  for (const FlowRecord& r : w.records) {
    try {
      sk.insert_duplicate(r.key, r.value);
    } catch (const ConsistencyError&) {
      ++ev.insert_failures;
    } catch (const CapacityError&) {
      ++ev.insert_failures;
    }
  }
  ev.insert_seconds = detail::seconds_since(t0);
  ev.records = w.records.size();
  sk.close();
  detail::score(ev, w, threshold, [&](const FlowKey& k) { return sk.try_query(k).value_or(0.0); });
  ev.card_est = sk.cardinality();
  return ev;
}

template <class Sketch, class Read>
WindowEval evaluate_banked(const Window& w, Sketch sk, double threshold, Read read) {
  WindowEval ev;
  const auto t0 = detail::Clock::now();
  for (const FlowRecord& r : w.records) sk.insert(r.key, r.value);
  ev.insert_seconds = detail::seconds_since(t0);
  ev.records = w.records.size();
  detail::score(ev, w, threshold, [&](const FlowKey& k) { return read(sk, k); });
  return ev;
}

/// Aggregate metrics of one (seed, kind, ratio) cell over all windows.
struct Row {
  std::uint64_t seed = 0;
  SketchKind kind = SketchKind::lss;
  double ratio = 0.0;
  Budget budget;
  std::size_t windows = 0;
  std::vector<double> rel_errors;  // pooled
  std::vector<double> entropy_errors;
  Confusion hh;
  std::optional<double> card_error;
  std::uint64_t insert_failures = 0;
  double insert_seconds = 0.0;
  double query_seconds = 0.0;
  std::size_t records = 0;
  std::size_t queries = 0;
  std::vector<nlohmann::json> window_detail;

  double mean_error() const { return mean(rel_errors); }
  double entropy_error() const { return mean(entropy_errors); }

  nlohmann::json to_json(bool timing) const {
    nlohmann::json j{{"seed", seed},
                     {"kind", kind_name(kind)},
                     {"ratio", ratio},
                     {"windows", windows},
                     {"flow_size",
                      {{"mean", mean_error()},
                       {"p50", rel_errors.empty() ? 0.0 : percentile(rel_errors, 50)},
                       {"p90", rel_errors.empty() ? 0.0 : percentile(rel_errors, 90)},
                       {"p99", rel_errors.empty() ? 0.0 : percentile(rel_errors, 99)}}},
                     {"entropy", {{"relative_error", entropy_error()}}},
                     {"heavy_hitters",
                      {{"precision", hh.precision()},
                       {"recall", hh.recall()},
                       {"f1", hh.f1()},
                       {"true_positives", hh.tp},
                       {"false_positives", hh.fp},
                       {"false_negatives", hh.fn}}},
                     {"cardinality", {{"relative_error", card_error ? nlohmann::json(*card_error) : nlohmann::json()}}}};
    nlohmann::json mem;
    if (kind == SketchKind::lss) {
      mem = {{"buckets", budget.lss_buckets},
             {"clusters", budget.clusters},
             {"sketch_bytes", budget.sketch_bytes},
             {"membership_bytes", budget.membership_bytes},
             {"charged_bytes", budget.charged_bytes()}};
    } else {
      mem = {{"counters_per_bank", budget.counters_per_bank}, {"sketch_bytes", budget.baseline_bytes}};
    }
    j["memory"] = mem;
    if (kind == SketchKind::lss) j["insert_failures"] = insert_failures;
    if (timing) {
      j["runtime"] = {{"insert_seconds", insert_seconds},
                      {"query_seconds", query_seconds},
                      {"insert_mops", insert_seconds > 0 ? static_cast<double>(records) / insert_seconds / 1e6 : 0.0},
                      {"query_mops", query_seconds > 0 ? static_cast<double>(queries) / query_seconds / 1e6 : 0.0}};
    }
    if (!window_detail.empty()) j["per_window"] = window_detail;
    return j;
  }
};

struct MetricsReport {
  nlohmann::json config;
  std::vector<Row> rows;  // seed-major, then ratio, then kind
  bool timing = false;

  const Row* find(std::uint64_t seed, SketchKind kind, double ratio) const {
    for (const Row& r : rows) {
      if (r.seed == seed && r.kind == kind && r.ratio == ratio) return &r;
    }
    return nullptr;
  }

  nlohmann::json to_json() const {
    nlohmann::json rj = nlohmann::json::array();
    for (const Row& r : rows) rj.push_back(r.to_json(timing));
    return {{"config", config}, {"rows", rj}};
  }

  /// Aligned-column summary, one line per row.
  std::string to_text() const {
    std::ostringstream os;
    os << std::left << std::setw(6) << "seed" << std::setw(5) << "kind" << std::setw(8) << "m/N" << std::right
       << std::setw(10) << "bytes" << std::setw(12) << "fs-mean" << std::setw(12) << "fs-p50" << std::setw(12)
       << "fs-p99" << std::setw(12) << "entropy" << std::setw(8) << "hh-f1" << std::setw(10) << "card";
    if (timing) os << std::setw(10) << "ins-Mops";
    os << '\n';
    os << std::setprecision(4);
    for (const Row& r : rows) {
      const std::size_t bytes = r.kind == SketchKind::lss ? r.budget.charged_bytes() : r.budget.baseline_bytes;
      os << std::left << std::setw(6) << r.seed << std::setw(5) << kind_name(r.kind) << std::setw(8) << r.ratio
         << std::right << std::setw(10) << bytes << std::setw(12) << r.mean_error() << std::setw(12)
         << (r.rel_errors.empty() ? 0.0 : percentile(r.rel_errors, 50)) << std::setw(12)
         << (r.rel_errors.empty() ? 0.0 : percentile(r.rel_errors, 99)) << std::setw(12) << r.entropy_error()
         << std::setw(8) << r.hh.f1() << std::setw(10) << (r.card_error ? std::to_string(*r.card_error) : "n/a");
      if (timing) {
        os << std::setw(10)
           << (r.insert_seconds > 0 ? static_cast<double>(r.records) / r.insert_seconds / 1e6 : 0.0);
      }
      os << '\n';
    }
    return os.str();
  }
};

/// Buckets for a ratio: m = round(ratio * N), at least one.
inline std::uint32_t buckets_for(double ratio, std::size_t window) {
  return static_cast<std::uint32_t>(std::max<long long>(1, std::llround(ratio * static_cast<double>(window))));
}

inline std::vector<Packet> load_trace(const BenchmarkConfig& cfg, std::uint64_t seed) {
  if (cfg.trace.file) return read_trace_csv(*cfg.trace.file);
  GenOptions g = cfg.trace.gen;
  g.seed = seed;
  return generate_trace(g);
}

/// Trains the model used for a given bucket budget: k is capped by m (every
/// array needs a bucket) and by the number of distinct training values.
inline ClusterModel train_for(const std::vector<double>& samples, std::size_t clusters, std::uint32_t m,
                              std::uint64_t seed, const AllocationPolicy& policy) {
  std::vector<double> distinct(samples);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  TrainOptions t;
  t.k = std::min({clusters, static_cast<std::size_t>(m), distinct.size()});
  t.kmeans.seed = seed;
  t.policy = policy;
  return train_model(samples, t);
}

/// Runs every (kind, ratio) cell for one seed.
inline std::vector<Row> run_seed(const BenchmarkConfig& cfg, std::uint64_t seed) {
  const auto packets = load_trace(cfg, seed);
  const auto windows = split_windows(packets, cfg.window, cfg.unit, cfg.max_windows);
  const auto samples = training_samples(packets, cfg.train_samples, cfg.unit);
  if (samples.empty()) throw InvalidInput("trace is empty");
  const double threshold = percentile(samples, cfg.hh_percentile);

  std::vector<Row> rows;
  for (double ratio : cfg.ratios) {
    const std::uint32_t m = buckets_for(ratio, cfg.window);
    const ClusterModel model = train_for(samples, cfg.clusters, m, seed, cfg.policy);
    SketchOptions opts;
    opts.hash_seed = mix64(seed ^ 0xB5EDULL);
    opts.counter_width = cfg.counter_width;
    opts.expected_flows = cfg.window;
    opts.policy = cfg.policy;

    Budget budget;
    {
      const LssSketch proto(model, m, opts);
      budget.lss_buckets = m;
      budget.clusters = proto.k();
      budget.sketch_bytes = proto.sketch_bytes();
      budget.membership_bytes = proto.membership_bytes();
    }
    const std::size_t counter_bytes = static_cast<std::size_t>(cfg.counter_width / 8);
    // Nearest whole row of counters, so the two budgets differ by at most
    // half a row.
    const std::size_t row = counter_bytes * cfg.banks;
    budget.membership_charged = cfg.include_membership;
    budget.counters_per_bank = (budget.charged_bytes() + row / 2) / row;
    budget.baseline_bytes = budget.counters_per_bank * cfg.banks * counter_bytes;
    if (budget.counters_per_bank == 0) throw InvalidInput("memory budget too small for the baseline banks");

    for (SketchKind kind : cfg.kinds) {
      Row row;
      row.seed = seed;
      row.kind = kind;
      row.ratio = ratio;
      row.budget = budget;
      std::uint64_t card_true = 0;
      std::uint64_t card_diff = 0;
      for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const Window& w = windows[wi];
        const std::uint64_t sk_seed = mix64(seed * 1000003 + wi);
        WindowEval ev;
        switch (kind) {
          case SketchKind::lss:
            ev = evaluate_lss(w, model, m, opts, threshold);
            break;
          case SketchKind::cm:
            ev = evaluate_banked(w, CountMinSketch(cfg.banks, budget.counters_per_bank, sk_seed, cfg.counter_width),
                                 threshold, [](const CountMinSketch& s, const FlowKey& k) {
                                   return static_cast<double>(s.query(k));
                                 });
            break;
          case SketchKind::cs:
            ev = evaluate_banked(w, CountSketch(cfg.banks, budget.counters_per_bank, sk_seed, cfg.counter_width),
                                 threshold, [](const CountSketch& s, const FlowKey& k) {
                                   return static_cast<double>(s.estimate_size(k));
                                 });
            break;
        }
        const double ent_err = ev.entropy_true > 0.0 ? relative_error(ev.entropy_true, ev.entropy_est) : 0.0;
        if (cfg.per_window) {
          row.window_detail.push_back({{"window", wi},
                                       {"flows", w.keys.size()},
                                       {"flow_size_mean", mean(ev.rel_errors)},
                                       {"entropy_error", ent_err},
                                       {"f1", ev.hh.f1()}});
        }
        row.rel_errors.insert(row.rel_errors.end(), ev.rel_errors.begin(), ev.rel_errors.end());
        row.entropy_errors.push_back(ent_err);
        row.hh += ev.hh;
        card_true += ev.card_true;
        card_diff += ev.card_est > ev.card_true ? ev.card_est - ev.card_true : ev.card_true - ev.card_est;
        row.insert_failures += ev.insert_failures;
        row.insert_seconds += ev.insert_seconds;
        row.query_seconds += ev.query_seconds;
        row.records += ev.records;
        row.queries += w.keys.size();
      }
      row.windows = windows.size();
      if (kind == SketchKind::lss && card_true > 0) {
        row.card_error = static_cast<double>(card_diff) / static_cast<double>(card_true);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline MetricsReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  std::vector<std::vector<Row>> per_seed(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  const std::size_t workers = std::min(cfg.threads, cfg.seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) per_seed[i] = run_seed(cfg, cfg.seeds[i]);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < cfg.seeds.size(); i += workers) {
          try {
            per_seed[i] = run_seed(cfg, cfg.seeds[i]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  MetricsReport rep;
  rep.config = cfg.to_json();
  rep.timing = cfg.timing;
  for (auto& rows : per_seed) {
    for (auto& r : rows) rep.rows.push_back(std::move(r));
  }
  return rep;
}

/// Per-seed verdicts for the equal-memory comparison: LSS flow-size error at
/// most a tenth of CM's and CS's, entropy error at most a quarter of CM's,
/// F1 at least the baselines' (and >= 0.95 at m/N = 0.1), exact cardinality.
inline nlohmann::json comparison_checks(const MetricsReport& rep, const std::vector<std::uint64_t>& seeds,
                                        const std::vector<double>& ratios) {
  nlohmann::json out = nlohmann::json::array();
  for (std::uint64_t seed : seeds) {
    bool pass = true;
    nlohmann::json reasons = nlohmann::json::array();
    for (double ratio : ratios) {
      const Row* l = rep.find(seed, SketchKind::lss, ratio);
      const Row* cm = rep.find(seed, SketchKind::cm, ratio);
      const Row* cs = rep.find(seed, SketchKind::cs, ratio);
      if (!l || !cm || !cs) throw InvalidInput("comparison needs lss, cm and cs rows");
      auto fail = [&](const std::string& why) {
        pass = false;
        std::ostringstream os;
        os << "m/N=" << ratio << ": " << why;
        reasons.push_back(os.str());
      };
      if (!(l->mean_error() <= 0.1 * cm->mean_error())) fail("flow-size error not <= 0.1x CM");
      if (!(l->mean_error() <= 0.1 * cs->mean_error())) fail("flow-size error not <= 0.1x CS");
      if (!(l->entropy_error() <= 0.25 * cm->entropy_error())) fail("entropy error not <= 0.25x CM");
      if (!(l->hh.f1() >= cm->hh.f1() && l->hh.f1() >= cs->hh.f1())) fail("F1 below a baseline");
      if (std::abs(ratio - 0.1) < 1e-12 && !(l->hh.f1() >= 0.95)) fail("F1 below 0.95");
    }
    out.push_back({{"seed", seed}, {"pass", pass}, {"failures", reasons}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sensitivity sweeps: one axis varied, the rest at the configured defaults.

struct SweepPoint {
  std::string label;
  double x = 0.0;
  double flow_size_error = 0.0;  // mean over seeds
  double entropy_error = 0.0;
  double f1 = 0.0;
};

struct SweepReport {
  std::string axis;
  std::vector<SweepPoint> points;

  nlohmann::json to_json() const {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : points) {
      pts.push_back({{"label", p.label},
                     {"x", p.x},
                     {"flow_size_error", p.flow_size_error},
                     {"entropy_error", p.entropy_error},
                     {"f1", p.f1}});
    }
    return {{"axis", axis}, {"points", pts}};
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << std::setprecision(10) << "label,x,flow_size_error,entropy_error,f1\n";
    for (const auto& p : points) {
      os << p.label << ',' << p.x << ',' << p.flow_size_error << ',' << p.entropy_error << ',' << p.f1 << '\n';
    }
    return os.str();
  }
};

inline std::vector<double> default_axis_values(const std::string& axis) {
  if (axis == "clusters") return {2, 5, 10, 30, 60};
  if (axis == "ratio") return {0.001, 0.01, 0.1, 0.5, 1.0};
  if (axis == "threshold") return {80, 90, 95, 99};
  if (axis == "epochs") return {1, 2, 3, 4, 5, 6, 7, 8};
  if (axis == "policy") return {0, 1, 2, 3, 4};
  throw InvalidInput("unknown sweep axis '" + axis + "'");
}

namespace detail {

inline SweepPoint average_lss(const MetricsReport& rep, std::string label, double x) {
  SweepPoint p{std::move(label), x, 0, 0, 0};
  std::size_t n = 0;
  for (const Row& r : rep.rows) {
    if (r.kind != SketchKind::lss) continue;
    p.flow_size_error += r.mean_error();
    p.entropy_error += r.entropy_error();
    p.f1 += r.hh.f1();
    ++n;
  }
  if (n) {
    p.flow_size_error /= static_cast<double>(n);
    p.entropy_error /= static_cast<double>(n);
    p.f1 /= static_cast<double>(n);
  }
  return p;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

/// Policy ablation codes: 0 = H*mu*d, 1 = mu*d, 2 = H*d, 3 = H*mu, 4 = uniform.
inline std::pair<std::string, AllocationPolicy> policy_variant(int code) {
  switch (code) {
    case 0: return {"H*mu*d", {true, true, true}};
    case 1: return {"mu*d", {false, true, true}};
    case 2: return {"H*d", {true, false, true}};
    case 3: return {"H*mu", {true, true, false}};
    case 4: return {"uniform", {false, false, false}};
  }
  throw InvalidInput("unknown policy variant " + std::to_string(code));
}

/// Sweeps one axis with LSS only. The epochs axis generates a trace of
/// `values.size()` windows, trains on the first, and reports each window.
inline SweepReport run_sensitivity(BenchmarkConfig base, const std::string& axis, std::vector<double> values = {}) {
  if (values.empty()) values = default_axis_values(axis);
  else (void)default_axis_values(axis);
  base.kinds = {SketchKind::lss};
  if (base.ratios.size() != 1) base.ratios = {0.1};
  SweepReport rep{axis, {}};

  if (axis == "epochs") {
    const auto epochs = static_cast<std::size_t>(*std::max_element(values.begin(), values.end()));
    base.per_window = true;
    base.max_windows = epochs;
    // Windows overlap by the flows active at each boundary, so generate a
    // little extra to fill the last epoch.
    if (!base.trace.file) base.trace.gen.n_flows = base.window * epochs + base.window / 2;
    const auto r = run_benchmark(base);
    std::vector<SweepPoint> pts(epochs);
    std::vector<std::size_t> counts(epochs, 0);
    for (const Row& row : r.rows) {
      for (const auto& wd : row.window_detail) {
        const auto wi = wd["window"].get<std::size_t>();
        if (wi >= epochs) continue;
        pts[wi].flow_size_error += wd["flow_size_mean"].get<double>();
        pts[wi].entropy_error += wd["entropy_error"].get<double>();
        pts[wi].f1 += wd["f1"].get<double>();
        ++counts[wi];
      }
    }
    for (double v : values) {
      const auto e = static_cast<std::size_t>(v) - 1;
      if (e >= epochs || counts[e] == 0) continue;
      SweepPoint p = pts[e];
      const auto c = static_cast<double>(counts[e]);
      p.flow_size_error /= c;
      p.entropy_error /= c;
      p.f1 /= c;
      p.label = "epoch-" + detail::fmt(v);
      p.x = v;
      rep.points.push_back(p);
    }
    return rep;
  }

  for (double v : values) {
    BenchmarkConfig cfg = base;
    std::string label;
    if (axis == "clusters") {
      cfg.clusters = static_cast<std::size_t>(v);
      label = detail::fmt(v);
    } else if (axis == "ratio") {
      cfg.ratios = {v};
      label = detail::fmt(v);
    } else if (axis == "threshold") {
      cfg.hh_percentile = v;
      label = "p" + detail::fmt(v);
    } else if (axis == "policy") {
      auto [name, pol] = policy_variant(static_cast<int>(v));
      cfg.policy = pol;
      label = name;
    }
    rep.points.push_back(detail::average_lss(run_benchmark(cfg), label, v));
  }
  return rep;
}

}  // namespace lss::bench
