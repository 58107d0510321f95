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

// lss: trace generation, model training, benchmarks, sweeps, and the
// ingestion -> sketching -> query pipeline from the command line.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lss/bench/benchmark.hpp"
#include "lss/bench/trace.hpp"
#include "lss/clustering.hpp"
#include "lss/pipeline/query.hpp"
#include "lss/pipeline/runner.hpp"
#include "lss/pipeline/store.hpp"

namespace {

using nlohmann::json;
namespace bench = lss::bench;
namespace pipe = lss::pipeline;

struct TraceFlags {
  std::string file;
  bench::GenOptions gen;

  void add(CLI::App* app, bool with_file = true) {
    if (with_file) app->add_option("--trace", file, "CSV trace to replay instead of generating one");
    app->add_option("--flows", gen.n_flows, "Generated flows")->capture_default_str();
    app->add_option("--zipf", gen.zipf_s, "Zipf exponent of flow sizes")->capture_default_str();
    app->add_option("--mean-packets", gen.mean_packets, "Target mean packets per flow")->capture_default_str();
    app->add_option("--packet-bytes", gen.packet_bytes, "Bytes per generated packet")->capture_default_str();
    app->add_option("--concurrency", gen.concurrency, "Flows active at once")->capture_default_str();
  }

  std::vector<bench::Packet> load(std::uint64_t seed) const {
    if (!file.empty()) return bench::read_trace_csv(file);
    auto g = gen;
    g.seed = seed;
    return bench::generate_trace(g);
  }
};

struct BenchFlags {
  TraceFlags trace;
  std::vector<std::string> kinds{"lss", "cm", "cs"};
  std::vector<double> ratios{0.1};
  std::size_t window = 10000;
  std::size_t clusters = 30;
  double hh_percentile = 90.0;
  int counter_width = 32;
  std::vector<std::uint64_t> seeds{1};
  std::size_t train_samples = 10000;
  std::size_t banks = lss::kDefaultBanks;
  std::string unit = "packets";
  bool no_membership_budget = false;
  bool timing = false;
  std::size_t threads = 1;

  void add(CLI::App* app) {
    trace.add(app);
    app->add_option("--kinds", kinds, "Sketch kinds: lss, cm, cs")->delimiter(',')->capture_default_str();
    app->add_option("--ratio", ratios, "m/N ratios")->delimiter(',')->capture_default_str();
    app->add_option("--window", window, "Flows per window (N)")->capture_default_str();
    app->add_option("--clusters", clusters, "K-means clusters")->capture_default_str();
    app->add_option("--hh-percentile", hh_percentile, "Heavy-hitter threshold percentile")->capture_default_str();
    app->add_option("--counter-width", counter_width, "Counter bits: 8, 16, 32 or 64")->capture_default_str();
    app->add_option("--seed", seeds, "Seeds (comma separated)")->delimiter(',')->capture_default_str();
    app->add_option("--train-samples", train_samples, "Training samples")->capture_default_str();
    app->add_option("--banks", banks, "CM/CS banks")->capture_default_str();
    app->add_option("--unit", unit, "Flow value unit: packets or bytes")->capture_default_str();
    app->add_flag("--no-membership-budget", no_membership_budget,
                  "Do not charge the membership table to LSS's memory budget");
    app->add_flag("--timing", timing, "Report wall-clock throughput (output no longer deterministic)");
    app->add_option("--threads", threads, "Seeds evaluated in parallel")->capture_default_str();
  }

  bench::BenchmarkConfig config() const {
    bench::BenchmarkConfig c;
    c.kinds.clear();
    for (const auto& k : kinds) c.kinds.push_back(bench::parse_kind(k));
    c.ratios = ratios;
    c.window = window;
    c.clusters = clusters;
    c.hh_percentile = hh_percentile;
    c.counter_width = counter_width;
    c.seeds = seeds;
    if (!trace.file.empty()) c.trace.file = trace.file;
    c.trace.gen = trace.gen;
    if (trace.file.empty() && c.trace.gen.n_flows == 0) c.trace.gen.n_flows = window;
    c.train_samples = train_samples;
    c.banks = banks;
    c.unit = bench::parse_unit(unit);
    c.include_membership = !no_membership_budget;
    c.timing = timing;
    c.threads = threads;
    return c;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw std::ios_base::failure("cannot write " + path);
}

std::vector<lss::FlowKey> read_keys(const std::string& arg) {
  std::vector<lss::FlowKey> keys;
  if (arg.empty()) return keys;
  std::string text = arg;
  if (arg.front() == '@') {
    std::ifstream in(arg.substr(1));
    if (!in) throw std::ios_base::failure("cannot open key file " + arg.substr(1));
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  std::string item;
  for (char c : text + ",") {
    if (c == ',' || c == '\n' || c == '\r' || c == ' ') {
      if (!item.empty()) keys.push_back(lss::parse_key(item));
      item.clear();
    } else {
      item += c;
    }
  }
  return keys;
}

// Trend checks on a sweep series; every axis has its own expectation.
bool check_sweep(const bench::SweepReport& rep, std::ostream& log) {
  const auto& p = rep.points;
  bool ok = true;
  auto fail = [&](const std::string& why) {
    ok = false;
    log << "check failed: " << why << '\n';
  };
  if (rep.axis == "clusters") {
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (p[i].x <= 30 && p[i].flow_size_error > p[i - 1].flow_size_error * 1.05) {
        fail("flow-size error rises from " + p[i - 1].label + " to " + p[i].label + " clusters");
      }
    }
  } else if (rep.axis == "threshold") {
    for (std::size_t i = 1; i < p.size(); ++i) {
      if (p[i].f1 > p[i - 1].f1 * 1.05) fail("F1 rises from " + p[i - 1].label + " to " + p[i].label);
    }
  } else if (rep.axis == "epochs" && !p.empty()) {
    for (const auto& q : p) {
      if (q.flow_size_error > 2.0 * p.front().flow_size_error) fail(q.label + " error exceeds 2x the first epoch");
    }
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locality-sensitive sketch toolkit"};
  app.require_subcommand(1);

  // gen ---------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "Generate a synthetic Zipf trace as CSV");
  TraceFlags gen_flags;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  gen_flags.add(gen, false);
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--out,-o", gen_out, "Output CSV path")->required();

  // train -------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train a cluster model from a trace");
  TraceFlags train_trace;
  std::size_t train_k = 30;
  std::size_t train_n = 10000;
  std::uint64_t train_seed = 1;
  std::string train_unit = "packets";
  std::string train_out;
  train_trace.add(train);
  train->add_option("--clusters", train_k, "K-means clusters")->capture_default_str();
  train->add_option("--train-samples", train_n, "Training samples")->capture_default_str();
  train->add_option("--seed", train_seed, "Seed for generation and k-means")->capture_default_str();
  train->add_option("--unit", train_unit, "Flow value unit: packets or bytes")->capture_default_str();
  train->add_option("--out,-o", train_out, "Model JSON path (stdout if omitted)");

  // bench -------------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "Equal-memory comparison of LSS, Count-Min and Count-Sketch");
  BenchFlags bench_flags;
  std::string bench_json;
  bool bench_check = false;
  bench_flags.add(bench_cmd);
  bench_cmd->add_option("--json", bench_json, "Write the JSON report here");
  bench_cmd->add_flag("--check", bench_check, "Exit nonzero unless LSS meets the comparison thresholds");

  // sweep -------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep of LSS along one axis");
  BenchFlags sweep_flags;
  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::string sweep_json;
  std::string sweep_csv;
  bool sweep_check = false;
  sweep_flags.add(sweep);
  sweep->add_option("--axis", sweep_axis, "clusters, ratio, threshold, epochs or policy")->required();
  sweep->add_option("--values", sweep_values, "Axis values (defaults per axis)")->delimiter(',');
  sweep->add_option("--json", sweep_json, "Write the JSON series here");
  sweep->add_option("--csv", sweep_csv, "Write the CSV series here");
  sweep->add_flag("--check", sweep_check, "Exit nonzero if the expected trend does not hold");

  // pipeline ----------------------------------------------------------------
  auto* pipeline = app.add_subcommand("pipeline", "Replay a trace through ingestion, sketching and the store");
  TraceFlags pipe_trace;
  std::uint64_t pipe_seed = 1;
  std::size_t pipe_producers = 4;
  std::size_t pipe_capacity = pipe::IngestionStage::kDefaultCapacity;
  std::size_t pipe_window = 10000;
  double pipe_ratio = 0.1;
  std::size_t pipe_k = 30;
  std::size_t pipe_train = 10000;
  double pipe_time_ms = 0.0;
  std::string pipe_store;
  std::string pipe_model;
  pipe_trace.add(pipeline);
  pipeline->add_option("--seed", pipe_seed, "Seed for generation and training")->capture_default_str();
  pipeline->add_option("--producers", pipe_producers, "Ingestion points")->capture_default_str();
  pipeline->add_option("--capacity", pipe_capacity, "Flowlet table entries per ingestion point")
      ->capture_default_str();
  pipeline->add_option("--window", pipe_window, "Flows per sequence window")->capture_default_str();
  pipeline->add_option("--ratio", pipe_ratio, "m/N")->capture_default_str();
  pipeline->add_option("--clusters", pipe_k, "K-means clusters")->capture_default_str();
  pipeline->add_option("--train-samples", pipe_train, "Training samples")->capture_default_str();
  pipeline->add_option("--time-window-ms", pipe_time_ms, "Use time windows of this length instead");
  pipeline->add_option("--model", pipe_model, "Cluster model JSON (trained on the trace if omitted)");
  pipeline->add_option("--store", pipe_store, "Store directory")->required();

  // query -------------------------------------------------------------------
  auto* query = app.add_subcommand("query", "Network-wide query over a store directory");
  std::string q_store;
  std::int64_t q_from = std::numeric_limits<std::int64_t>::min();
  std::int64_t q_to = std::numeric_limits<std::int64_t>::max();
  std::string q_task;
  std::string q_keys;
  double q_threshold = 0.0;
  query->add_option("--store", q_store, "Store directory")->required();
  query->add_option("--from", q_from, "Earliest arrival (ns)");
  query->add_option("--to", q_to, "Latest arrival (ns)");
  query->add_option("--task", q_task, "flow-size, entropy, heavy-hitters, cardinality or heavy-changes")->required();
  query->add_option("--keys", q_keys, "Comma separated flow keys, or @file");
  query->add_option("--threshold", q_threshold, "Heavy-hitter / heavy-change threshold")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto g = gen_flags.gen;
      g.seed = gen_seed;
      bench::write_trace_csv(gen_out, bench::generate_trace(g));
      return 0;
    }

    if (*train) {
      const auto packets = train_trace.load(train_seed);
      const auto samples = bench::training_samples(packets, train_n, bench::parse_unit(train_unit));
      lss::TrainOptions opts;
      opts.k = train_k;
      opts.kmeans.seed = train_seed;
      const auto model = lss::train_model(samples, opts);
      write_text(train_out, lss::to_json(model).dump(2) + "\n");
      return 0;
    }

    if (*bench_cmd) {
      const auto cfg = bench_flags.config();
      const auto rep = bench::run_benchmark(cfg);
      const auto j = rep.to_json();
      std::cout << rep.to_text();
      if (!bench_json.empty()) write_text(bench_json, j.dump(2) + "\n");
      if (bench_check) {
        const auto checks = bench::comparison_checks(rep, cfg.seeds, cfg.ratios);
        std::size_t passed = 0;
        for (const auto& c : checks) {
          passed += c["pass"].get<bool>() ? 1 : 0;
          for (const auto& why : c["failures"]) std::cerr << "seed " << c["seed"] << ": " << why.get<std::string>() << '\n';
        }
        std::cout << "check: " << passed << "/" << checks.size() << " seeds pass\n";
        // At least 90% of seeds must pass.
        if (passed * 10 < checks.size() * 9) return 2;
      }
      return 0;
    }

    if (*sweep) {
      const auto rep = bench::run_sensitivity(sweep_flags.config(), sweep_axis, sweep_values);
      std::cout << rep.to_csv();
      if (!sweep_json.empty()) write_text(sweep_json, rep.to_json().dump(2) + "\n");
      if (!sweep_csv.empty()) write_text(sweep_csv, rep.to_csv());
      if (sweep_check && !check_sweep(rep, std::cerr)) return 2;
      return 0;
    }

    if (*pipeline) {
      const auto packets = pipe_trace.load(pipe_seed);
      lss::ClusterModel model;
      const std::uint32_t m = bench::buckets_for(pipe_ratio, pipe_window);
      if (!pipe_model.empty()) {
        std::ifstream in(pipe_model);
        if (!in) throw std::ios_base::failure("cannot open model " + pipe_model);
        model = lss::model_from_json(json::parse(in));
      } else {
        const auto samples = bench::training_samples(packets, pipe_train, bench::ValueUnit::bytes);
        model = bench::train_for(samples, pipe_k, m, pipe_seed, {});
      }
      pipe::PipelineConfig cfg;
      cfg.producers = pipe_producers;
      cfg.ingest_capacity = pipe_capacity;
      cfg.m = m;
      cfg.window = pipe_time_ms > 0 ? pipe::WindowConfig::time(static_cast<std::int64_t>(pipe_time_ms * 1e6))
                                     : pipe::WindowConfig::flows(pipe_window);
      cfg.sketch.hash_seed = lss::mix64(pipe_seed);
      lss::pipeline::SketchStore store(pipe_store);
      const auto stats = pipe::run_pipeline(packets, model, cfg, store);
      auto j = stats.to_json();
      j["store"] = pipe_store;
      std::cout << j.dump(2) << '\n';
      return stats.fifo_violations == 0 ? 0 : 3;
    }

    if (*query) {
      lss::pipeline::SketchStore store(q_store);
      pipe::QueryParams params;
      params.keys = read_keys(q_keys);
      params.threshold = q_threshold;
      const auto report = pipe::network_wide_query(store, q_from, q_to, pipe::parse_task(q_task), params);
      std::cout << report.dump(2) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "lss: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
