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

// Acceptance run: one PASS/FAIL line per criterion, details on the lines
// that follow it. Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lss/baselines.hpp"
#include "lss/bench/benchmark.hpp"
#include "lss/bench/trace.hpp"
#include "lss/clustering.hpp"
#include "lss/cuckoo.hpp"
#include "lss/pipeline/runner.hpp"
#include "lss/pipeline/store.hpp"
#include "lss/sketch.hpp"

namespace {

using namespace lss;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "  violated: " << what << '\n';
    }
  }
};

FlowKey key(std::uint64_t id) { return FlowKey::from_id(id); }

// ---------------------------------------------------------------------------
// 1. Noisy-bucket expectation against a ball-bin simulation.

Outcome noisy_bucket_fidelity() {
  Outcome o;
  const auto t0 = Clock::now();
  constexpr std::size_t kKeys = 900;
  constexpr int kTrials = 100000;
  std::mt19937_64 rng(0x1E44A1);
  double worst = 0.0;
  for (std::size_t c : {1u, 3u}) {
    for (double ratio : {0.1, 0.5, 1.0, 2.0, 10.0}) {
      const auto m = static_cast<std::size_t>(ratio * kKeys);
      const std::size_t w = m / c;
      std::vector<std::uint32_t> load(w);
      std::uint64_t noisy = 0;
      for (int t = 0; t < kTrials; ++t) {
        for (std::size_t b = 0; b < c; ++b) {
          std::fill(load.begin(), load.end(), 0);
          for (std::size_t i = 0; i < kKeys; ++i) ++load[uniform_below(rng, w)];
          for (auto l : load) noisy += l >= 2 ? 1 : 0;
        }
      }
      const double sim = static_cast<double>(noisy) / (static_cast<double>(kTrials) * static_cast<double>(w * c));
      const double formula = expected_noisy_fraction(static_cast<double>(w * c), kKeys, static_cast<double>(c));
      const double gap = std::abs(sim - formula);
      worst = std::max(worst, gap);
      o.detail << "  c=" << c << " m/N=" << ratio << " simulated " << sim << " formula " << formula << " gap " << gap
               << '\n';
      o.require(gap <= 0.005, "gap within 0.005 at c=" + std::to_string(c) + " m/N=" + std::to_string(ratio));
    }
  }
  const double secs = seconds_since(t0);
  o.detail << "  worst gap " << worst << ", " << secs << " s\n";
  o.require(secs < 30.0, "runtime under 30 s");
  return o;
}

// ---------------------------------------------------------------------------
// 2. Query equals the dense decode, computed here by exact Gauss-Jordan
// inversion of A^T A restricted to the buckets that hold keys.

struct Frac {
  __int128_t n = 0;
  __int128_t d = 1;

  Frac() = default;
  Frac(__int128_t num, __int128_t den = 1) : n(num), d(den) { reduce(); }

  void reduce() {
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128_t a = n < 0 ? -n : n;
    __int128_t b = d;
    while (b) {
      const __int128_t t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
  }
  friend Frac operator+(Frac a, Frac b) { return {a.n * b.d + b.n * a.d, a.d * b.d}; }
  friend Frac operator-(Frac a, Frac b) { return {a.n * b.d - b.n * a.d, a.d * b.d}; }
  friend Frac operator*(Frac a, Frac b) { return {a.n * b.n, a.d * b.d}; }
  friend Frac operator/(Frac a, Frac b) { return {a.n * b.d, a.d * b.n}; }
  friend bool operator==(Frac a, Frac b) { return a.n == b.n && a.d == b.d; }
};

std::vector<Frac> dense_decode(const std::vector<std::size_t>& bucket_of, std::size_t m, const std::vector<std::int64_t>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> used;
  for (std::size_t j = 0; j < m; ++j) {
    if (std::find(bucket_of.begin(), bucket_of.end(), j) != bucket_of.end()) used.push_back(j);
  }
  const std::size_t r = used.size();
  // A restricted to used columns, N x r.
  std::vector<std::vector<Frac>> a(n, std::vector<Frac>(r));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < r; ++c) a[i][c] = Frac(bucket_of[i] == used[c] ? 1 : 0);
  // [C | I] with C = A^T A, then Gauss-Jordan.
  std::vector<std::vector<Frac>> g(r, std::vector<Frac>(2 * r));
  for (std::size_t p = 0; p < r; ++p) {
    for (std::size_t q = 0; q < r; ++q) {
      Frac s;
      for (std::size_t i = 0; i < n; ++i) s = s + a[i][p] * a[i][q];
      g[p][q] = s;
    }
    g[p][r + p] = Frac(1);
  }
  for (std::size_t col = 0; col < r; ++col) {
    std::size_t piv = col;
    while (g[piv][col].n == 0) ++piv;
    std::swap(g[piv], g[col]);
    const Frac inv = Frac(1) / g[col][col];
    for (auto& v : g[col]) v = v * inv;
    for (std::size_t row = 0; row < r; ++row) {
      if (row == col || g[row][col].n == 0) continue;
      const Frac f = g[row][col];
      for (std::size_t k = 0; k < 2 * r; ++k) g[row][k] = g[row][k] - f * g[col][k];
    }
  }
  std::vector<Frac> enc(r);  // A^T X
  for (std::size_t c = 0; c < r; ++c)
    for (std::size_t i = 0; i < n; ++i) enc[c] = enc[c] + a[i][c] * Frac(x[i]);
  std::vector<Frac> mid(r);  // C^-1 A^T X
  for (std::size_t p = 0; p < r; ++p)
    for (std::size_t q = 0; q < r; ++q) mid[p] = mid[p] + g[p][r + q] * enc[q];
  std::vector<Frac> out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < r; ++c) out[i] = out[i] + a[i][c] * mid[c];
  return out;
}

Outcome autoencoder_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(0xAE2);
  const std::vector<double> center{500};
  const ClusterModel model = cluster_stats(center, center);
  std::size_t mismatches = 0;
  std::size_t compared = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n = 1 + uniform_below(rng, 64);
    const auto m = static_cast<std::uint32_t>(1 + uniform_below(rng, 16));
    SketchOptions so;
    so.hash_seed = rng();
    so.expected_flows = 64;
    LssSketch s(model, m, so);
    std::vector<std::int64_t> x(n);
    std::vector<std::size_t> bucket_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<std::int64_t>(uniform_below(rng, 1001));
      const FlowKey k = key((static_cast<std::uint64_t>(inst) << 8) | i);
      s.insert(k, static_cast<std::uint64_t>(x[i]));
      bucket_of[i] = s.bucket_index(k, 0);
    }
    const auto xhat = dense_decode(bucket_of, m, x);
    for (std::size_t i = 0; i < n; ++i) {
      const auto e = s.query_fraction(key((static_cast<std::uint64_t>(inst) << 8) | i));
      ++compared;
      if (!(Frac(e.val_sum, e.key_count) == xhat[i])) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  o.detail << "  " << compared << " estimates over 1000 instances, " << mismatches << " mismatches, " << secs << " s\n";
  o.require(mismatches == 0, "every estimate equals the dense decode exactly");
  o.require(secs < 10.0, "runtime under 10 s");
  return o;
}

// ---------------------------------------------------------------------------
// 3. Unbiasedness and the deviation bound within one cluster.

Outcome estimator_bounds() {
  Outcome o;
  constexpr std::uint64_t kMu = 1000;
  constexpr std::uint64_t kM = 100;  // values uniform on [mu - M, mu + M]
  const std::vector<double> center{static_cast<double>(kMu)};
  const ClusterModel model = cluster_stats(center, center);
  std::mt19937_64 rng(0x7E3);
  std::vector<double> err;
  std::map<std::uint64_t, std::pair<std::size_t, std::array<std::size_t, 2>>> by_n;  // n_j -> trials, tail hits
  for (int t = 0; t < 1000; ++t) {
    SketchOptions so;
    so.hash_seed = rng();
    so.expected_flows = 64;
    LssSketch s(model, 16, so);
    std::vector<std::uint64_t> x(64);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = kMu - kM + uniform_below(rng, 2 * kM + 1);
      s.insert(key(i), x[i]);
    }
    const std::size_t j = uniform_below(rng, x.size());
    const auto e = s.query_fraction(key(j));
    const double dev = e.value() - static_cast<double>(x[j]);
    err.push_back(dev);
    auto& slot = by_n[e.key_count];
    ++slot.first;
    for (int a = 0; a < 2; ++a) {
      if (std::abs(dev) >= static_cast<double>((3 + a) * kM)) ++slot.second[static_cast<std::size_t>(a)];
    }
  }
  const double mean = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
  double var = 0.0;
  for (double e : err) var += (e - mean) * (e - mean);
  const double se = std::sqrt(var / static_cast<double>(err.size() - 1) / static_cast<double>(err.size()));
  o.detail << "  mean signed error " << mean << ", standard error " << se << '\n';
  o.require(std::abs(mean) <= 3 * se, "mean signed error within 3 standard errors of 0");
  for (const auto& [n, rec] : by_n) {
    for (int a = 0; a < 2; ++a) {
      const double mult = 3.0 + a;
      const double bound = 1.0 / ((mult - 1) * (mult - 1) * static_cast<double>(n * n));
      const double rate = static_cast<double>(rec.second[static_cast<std::size_t>(a)]) / static_cast<double>(rec.first);
      o.require(rate <= bound, "tail at a=" + std::to_string(3 + a) + "M, n=" + std::to_string(n));
      if (n <= 6) {
        o.detail << "  n=" << n << " a=" << mult << "M: " << rate << " <= " << bound << " (" << rec.first << " trials)\n";
      }
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// 4. Duplication-adaptive maintenance equals inserting totals.

Outcome duplication_equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  constexpr std::size_t kFlows = 10000;
  bench::ZipfSampler zipf(1.1, 200);
  std::mt19937_64 rng(0xD0B);
  std::vector<double> samples(10000);
  for (auto& s : samples) s = static_cast<double>(zipf(rng) * (1 + uniform_below(rng, 10)));
  TrainOptions to;
  to.k = 30;
  const ClusterModel model = train_model(samples, to);

  std::size_t identical = 0;
  std::size_t exact_card = 0;
  std::size_t redraws = 0;
  std::size_t relocations = 0;
  for (int stream = 0; stream < 500; ++stream) {
    SketchOptions so;
    so.hash_seed = rng();
    so.expected_flows = kFlows;
    LssSketch dup(model, 1000, so);
    LssSketch tot(model, 1000, so);

    // Keys without fingerprint aliases in this membership table.
    std::vector<FlowKey> keys;
    std::set<std::pair<std::size_t, std::uint16_t>> seen;
    while (keys.size() < kFlows) {
      FlowKey k = key(rng());
      const auto [b, fp] = dup.membership().locate(k);
      const std::size_t lo = std::min(b, dup.membership().alt_bucket(b, fp));
      if (!seen.insert({lo, fp}).second) {
        ++redraws;
        continue;
      }
      keys.push_back(std::move(k));
    }
    std::vector<std::uint64_t> totals(kFlows, 0);
    std::vector<std::pair<std::uint32_t, std::uint64_t>> frags;
    for (std::size_t f = 0; f < kFlows; ++f) {
      const auto pieces = 1 + uniform_below(rng, 20);
      for (std::uint64_t p = 0; p < pieces; ++p) {
        const std::uint64_t v = zipf(rng);
        frags.emplace_back(static_cast<std::uint32_t>(f), v);
        totals[f] += v;
      }
    }
    std::shuffle(frags.begin(), frags.end(), rng);
    std::vector<std::uint8_t> first_cluster(kFlows, 255);
    for (const auto& [f, v] : frags) {
      dup.insert_duplicate(keys[f], v);
      if (first_cluster[f] == 255) first_cluster[f] = dup.membership().lookup(keys[f])->cluster;
    }
    for (std::size_t f = 0; f < kFlows; ++f) {
      tot.insert(keys[f], totals[f]);
      relocations += dup.membership().lookup(keys[f])->cluster != first_cluster[f] ? 1 : 0;
    }
    identical += dup.arrays() == tot.arrays() ? 1 : 0;
    exact_card += dup.cardinality() == kFlows ? 1 : 0;
  }
  o.detail << "  " << identical << "/500 streams bucket-identical, " << exact_card << "/500 exact cardinality, "
           << relocations << " flows ending outside their first cluster, " << redraws << " aliasing keys redrawn, "
           << seconds_since(t0) << " s\n";
  o.require(identical == 500, "all streams bucket-for-bucket identical");
  o.require(exact_card == 500, "cardinality exact in all streams");
  return o;
}

// ---------------------------------------------------------------------------
// 5. Comparison against CM and CS at equal memory.

Outcome comparison() {
  Outcome o;
  const auto t0 = Clock::now();
  bench::BenchmarkConfig cfg;
  cfg.ratios = {0.001, 0.01, 0.1};
  cfg.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto rep = bench::run_benchmark(cfg);
  const auto checks = bench::comparison_checks(rep, cfg.seeds, cfg.ratios);
  std::size_t passed = 0;
  std::map<std::string, std::size_t> reasons;
  for (const auto& c : checks) {
    passed += c["pass"].get<bool>() ? 1 : 0;
    for (const auto& r : c["failures"]) ++reasons[r.get<std::string>()];
  }
  for (double ratio : cfg.ratios) {
    double l = 0, cm = 0, cs = 0, le = 0, cme = 0, f1 = 0, cmf = 0, csf = 0;
    for (auto seed : cfg.seeds) {
      l += rep.find(seed, bench::SketchKind::lss, ratio)->mean_error();
      cm += rep.find(seed, bench::SketchKind::cm, ratio)->mean_error();
      cs += rep.find(seed, bench::SketchKind::cs, ratio)->mean_error();
      le += rep.find(seed, bench::SketchKind::lss, ratio)->entropy_error();
      cme += rep.find(seed, bench::SketchKind::cm, ratio)->entropy_error();
      f1 += rep.find(seed, bench::SketchKind::lss, ratio)->hh.f1();
      cmf += rep.find(seed, bench::SketchKind::cm, ratio)->hh.f1();
      csf += rep.find(seed, bench::SketchKind::cs, ratio)->hh.f1();
    }
    const double n = static_cast<double>(cfg.seeds.size());
    o.detail << "  m/N=" << ratio << " mean over seeds: flow-size LSS " << l / n << " CM " << cm / n << " CS "
             << cs / n << "; entropy LSS " << le / n << " CM " << cme / n << "; F1 LSS " << f1 / n << " CM "
             << cmf / n << " CS " << csf / n << '\n';
  }
  for (const auto& [r, count] : reasons) o.detail << "  " << count << " seed(s): " << r << '\n';
  const double secs = seconds_since(t0);
  o.detail << "  " << passed << "/10 seeds pass every check, " << secs << " s\n";
  o.require(passed >= 9, "at least 9 of 10 seeds pass");
  o.require(secs < 300.0, "runtime under 5 min");
  return o;
}

// ---------------------------------------------------------------------------
// 6. Membership false positives and fill success.

Outcome cuckoo_filter() {
  Outcome o;
  CuckooTable t(1 << 16, CuckooTable::kDefaultMaxKicks, 0xF9);
  std::uint64_t id = 0;
  try {
    for (;;) t.insert(key(id++), 0, 0);
  } catch (const CapacityError&) {
  }
  std::size_t fp = 0;
  constexpr std::size_t kProbes = 1000000;
  for (std::size_t i = 0; i < kProbes; ++i) fp += t.contains(key((1ULL << 62) + i)) ? 1 : 0;
  const double rate = static_cast<double>(fp) / kProbes;
  o.detail << "  load " << t.load_factor() << ", " << fp << " false positives in " << kProbes << " probes (" << rate * 100
           << "%)\n";
  o.require(rate <= 0.00024, "false-positive rate at most 0.024%");

  std::size_t ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CuckooTable f(1 << 14, 500, mix64(seed));
    const auto target = static_cast<std::size_t>(0.9 * static_cast<double>(f.capacity()));
    try {
      for (std::size_t i = 0; i < target; ++i) f.insert(key(mix64(seed * 7919 + i)), 0, i);
      ++ok;
    } catch (const CapacityError&) {
    }
  }
  o.detail << "  0.9 load reached on " << ok << "/100 seeds\n";
  o.require(ok >= 99, "0.9 load on at least 99 of 100 seeds");
  return o;
}

// ---------------------------------------------------------------------------
// 7. Pipeline conservation, ordering and traffic reduction.

Outcome pipeline_conservation() {
  Outcome o;
  const auto t0 = Clock::now();
  constexpr std::size_t kPackets = 1000000;
  bench::GenOptions g;
  g.seed = 7;
  g.mean_packets = 100;
  g.packet_bytes = 1000;
  // Smallest flow count whose packets reach the target, then cut to it.
  g.n_flows = 100000;
  const auto sizes = bench::generate_flow_sizes(g);
  std::uint64_t acc = 0;
  std::size_t flows = 0;
  while (acc < kPackets) acc += sizes[flows++];
  g.n_flows = flows;
  auto packets = bench::generate_trace(g);
  packets.erase(packets.begin() + kPackets, packets.end());

  std::set<FlowKey> distinct;
  std::uint64_t bytes = 0;
  for (const auto& p : packets) {
    bytes += p.size_bytes;
    distinct.insert(p.key);
  }
  TrainOptions to;
  to.k = 30;
  const auto model = train_model(bench::training_samples(packets, 10000, bench::ValueUnit::bytes), to);

  const auto dir = std::filesystem::temp_directory_path() / ("lss-acceptance-" + std::to_string(mix64(bytes) & 0xFFFFFF));
  std::filesystem::remove_all(dir);
  pipeline::PipelineStats stats;
  {
    pipeline::SketchStore store(dir);
    pipeline::PipelineConfig cfg;
    cfg.producers = 4;
    cfg.ingest_capacity = 100;
    cfg.window = pipeline::WindowConfig::flows(10000);
    cfg.m = 1000;
    stats = pipeline::run_pipeline(packets, model, cfg, store);
  }
  // Re-open the store from disk and sum what it holds.
  pipeline::SketchStore reopened(dir);
  std::uint64_t stored = 0;
  std::uint64_t stored_flows = 0;
  const auto envelopes = reopened.all();
  for (const auto& e : envelopes) {
    const auto sk = e.decode_sketch();
    stored += sk.total_value();
    stored_flows += sk.cardinality();
  }
  std::filesystem::remove_all(dir);

  const double reduction = static_cast<double>(bytes) / (8.0 * static_cast<double>(stats.flowlet_records));
  const double wire_reduction = static_cast<double>(bytes) / static_cast<double>(stats.flowlet_wire_bytes);
  o.detail << "  " << packets.size() << " packets from " << distinct.size() << " flows, " << bytes << " bytes\n";
  o.detail << "  " << envelopes.size() << " envelopes re-read, holding " << stored << " bytes and " << stored_flows
           << " window-flows; " << stats.early_rotations << " early rotations\n";
  o.detail << "  " << stats.flowlet_records << " flowlet records in " << stats.batches << " batches: reduction "
           << reduction << "x at 8 bytes/record, " << wire_reduction << "x on the wire\n";
  o.detail << "  fifo violations " << stats.fifo_violations << ", " << seconds_since(t0) << " s\n";
  o.require(stored == bytes, "stored val_sum equals packet bytes");
  o.require(stats.packet_bytes == bytes, "ingested bytes equal trace bytes");
  o.require(stats.fifo_violations == 0, "per-producer FIFO order");
  o.require(reduction >= 1000.0, "traffic reduction of at least 10^3");
  return o;
}

// ---------------------------------------------------------------------------
// 8. Sensitivity to the cluster count and the heavy-hitter threshold.

Outcome sensitivity() {
  Outcome o;
  bench::BenchmarkConfig base;
  base.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto clusters = bench::run_sensitivity(base, "clusters", {2, 5, 10, 30, 60});
  std::map<double, double> err;
  for (const auto& p : clusters.points) {
    err[p.x] = p.flow_size_error;
    o.detail << "  clusters " << p.x << ": flow-size error " << p.flow_size_error << '\n';
  }
  const std::vector<double> xs{2, 5, 10, 30};
  for (std::size_t i = 1; i < xs.size(); ++i) {
    o.require(err[xs[i]] <= 1.05 * err[xs[i - 1]], "error non-increasing from " + std::to_string(xs[i - 1]));
  }
  // Flattening: the error drop per added cluster past 30 is below the drop
  // per added cluster from 10 to 30.
  const double slope_before = (err[10] - err[30]) / 20.0;
  const double slope_after = (err[30] - err[60]) / 30.0;
  o.detail << "  error drop per cluster: 10..30 " << slope_before << ", 30..60 " << slope_after
           << "; relative drop 10..30 " << (err[10] - err[30]) / err[10] << ", 30..60 " << (err[30] - err[60]) / err[30]
           << '\n';
  o.require(slope_after < slope_before, "per-cluster improvement shrinks after 30");

  const auto thresholds = bench::run_sensitivity(base, "threshold", {80, 90, 95, 99});
  for (std::size_t i = 0; i < thresholds.points.size(); ++i) {
    o.detail << "  percentile " << thresholds.points[i].x << ": F1 " << thresholds.points[i].f1 << '\n';
    if (i > 0) {
      o.require(thresholds.points[i].f1 <= thresholds.points[i - 1].f1,
                "F1 non-increasing at percentile " + std::to_string(thresholds.points[i].x));
    }
  }
  return o;
}

// ---------------------------------------------------------------------------
// 9. Determinism and serialization round trip.

Outcome determinism() {
  Outcome o;
  bench::BenchmarkConfig cfg;
  cfg.ratios = {0.01, 0.1};
  cfg.seeds = {3, 4};
  const auto a = bench::run_benchmark(cfg).to_json().dump();
  const auto b = bench::run_benchmark(cfg).to_json().dump();
  o.require(a == b, "benchmark JSON byte-identical across runs");

  auto build = [] {
    bench::GenOptions g;
    g.seed = 11;
    const auto packets = bench::generate_trace(g);
    TrainOptions to;
    to.k = 30;
    const auto model = train_model(bench::training_samples(packets, 10000, bench::ValueUnit::packets), to);
    SketchOptions so;
    so.expected_flows = 10000;
    LssSketch s(model, 1000, so);
    CountMinSketch cm(3, 4000, 5);
    CountSketch cs(3, 4000, 5);
    for (const auto& p : packets) {
      s.insert_duplicate(p.key, 1);
      cm.insert(p.key, 1);
      cs.insert(p.key, 1);
    }
    s.close();
    std::vector<FlowKey> keys;
    std::set<FlowKey> seen;
    for (const auto& p : packets) {
      if (seen.insert(p.key).second) keys.push_back(p.key);
    }
    return std::make_tuple(std::move(s), cm.serialize(), cs.serialize(), std::move(keys));
  };
  const auto [s1, cm1, cs1, keys] = build();
  const auto [s2, cm2, cs2, keys2] = build();
  const auto bytes = s1.serialize();
  o.require(bytes == s2.serialize(), "LSS bytes identical across runs");
  o.require(cm1 == cm2 && cs1 == cs2, "CM and CS bytes identical across runs");

  const auto back = LssSketch::deserialize(bytes);
  std::size_t differing = 0;
  for (const auto& k : keys) differing += back.query(k) != s1.query(k) ? 1 : 0;
  o.require(differing == 0, "every query answer survives the round trip");
  o.require(back.cardinality() == s1.cardinality() && back.entropy(keys) == s1.entropy(keys),
            "cardinality and entropy survive the round trip");
  o.require(back.serialize() == bytes, "re-serialization is byte-identical");
  o.detail << "  report " << a.size() << " bytes; sketch " << bytes.size() << " bytes; " << keys.size()
           << " keys queried, " << differing << " differ\n";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "noisy-bucket expectation matches simulation", noisy_bucket_fidelity},
      {2, "query equals dense autoencoder decode", autoencoder_equivalence},
      {3, "estimator unbiased and within deviation bound", estimator_bounds},
      {4, "duplication-adaptive state equals totals", duplication_equivalence},
      {5, "comparison with CM and CS at equal memory", comparison},
      {6, "cuckoo false positives and fill", cuckoo_filter},
      {7, "pipeline conservation, order and reduction", pipeline_conservation},
      {8, "sensitivity trends", sensitivity},
      {9, "determinism and round trip", determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << "  exception: " << e.what() << '\n';
    }
    failed += out.pass ? 0 : 1;
    std::cout << (out.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " ("
              << seconds_since(t0) << " s)\n"
              << out.detail.str() << std::flush;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria pass\n";
  return failed == 0 ? 0 : 1;
}
