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
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lss/common.hpp"
#include "lss/wire.hpp"

namespace lss {

// The cluster index is stored in an 8-bit membership field.
inline constexpr std::size_t kMaxClusters = 256;

struct KMeansOptions {
  std::size_t max_iters = 100;
  /// Stop once every center moves less than `tol` relative to its magnitude.
  double tol = 1e-4;
  std::uint64_t seed = 1;
};

struct KMeansResult {
  std::vector<double> centers;  // ascending
  /// Potential of the seeding, then after each assignment/update round.
  std::vector<double> potentials;
  std::size_t iterations = 0;
};

/// Sum over samples of the squared distance to the nearest center.
inline double kmeans_potential(std::span<const double> samples, std::span<const double> centers);

/// Index of the nearest center in an ascending list; ties go to the lower index.
inline std::size_t nearest_index(std::span<const double> centers, double value) {
  auto it = std::lower_bound(centers.begin(), centers.end(), value);
  if (it == centers.begin()) return 0;
  if (it == centers.end()) return centers.size() - 1;
  const auto hi = static_cast<std::size_t>(it - centers.begin());
  const std::size_t lo = hi - 1;
  return (value - centers[lo]) <= (centers[hi] - value) ? lo : hi;
}

inline double kmeans_potential(std::span<const double> samples, std::span<const double> centers) {
  double f = 0.0;
  for (double x : samples) {
    const double d = x - centers[nearest_index(centers, x)];
    f += d * d;
  }
  return f;
}

namespace detail {

inline void validate_samples(std::span<const double> samples) {
  if (samples.empty()) throw InvalidInput("training samples must not be empty");
  for (double x : samples) {
    if (!std::isfinite(x) || x < 0.0) throw InvalidInput("training samples must be finite and non-negative");
  }
}

// k-means++ over the distinct values of a sorted sample, weighting each
// distinct value by its multiplicity.
inline std::vector<double> seed_plus_plus(std::span<const double> sorted, std::size_t k, std::uint64_t seed) {
  std::vector<double> values;
  std::vector<double> weight;
  for (double x : sorted) {
    if (values.empty() || values.back() != x) {
      values.push_back(x);
      weight.push_back(1.0);
    } else {
      weight.back() += 1.0;
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<double> centers;
  centers.reserve(k);
  std::vector<double> dist2(values.size(), std::numeric_limits<double>::infinity());

  auto pick = [&](const std::vector<double>& mass) {
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    const double target = unit_double(rng()) * total;
    double acc = 0.0;
    std::size_t chosen = mass.size();
    for (std::size_t i = 0; i < mass.size(); ++i) {
      if (mass[i] <= 0.0) continue;
      chosen = i;
      acc += mass[i];
      if (acc > target) break;
    }
    return chosen;
  };

  centers.push_back(values[pick(weight)]);
  std::vector<double> mass(values.size());
  while (centers.size() < k) {
    const double c = centers.back();
    for (std::size_t i = 0; i < values.size(); ++i) {
      dist2[i] = std::min(dist2[i], (values[i] - c) * (values[i] - c));
      mass[i] = dist2[i] * weight[i];
    }
    const std::size_t next = pick(mass);
    if (next == values.size()) break;  // every distinct value is already a center
    centers.push_back(values[next]);
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

}  // namespace detail

/// Lloyd's algorithm on one-dimensional samples with k-means++ seeding.
/// Deterministic for a given seed.
inline KMeansResult train_kmeans(std::span<const double> samples, std::size_t k, const KMeansOptions& opts = {}) {
  detail::validate_samples(samples);
  if (k == 0) throw InvalidInput("k must be positive");
  if (opts.max_iters == 0) throw InvalidInput("max_iters must be positive");
  if (!(opts.tol >= 0.0)) throw InvalidInput("tol must be non-negative");

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t n_distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) n_distinct += sorted[i] != sorted[i - 1] ? 1 : 0;
  if (k > n_distinct) throw InvalidInput("k exceeds the number of distinct sample values");

  KMeansResult result;
  std::vector<double> centers = detail::seed_plus_plus(sorted, k, opts.seed);
  const std::size_t n = sorted.size();
  std::vector<std::size_t> bounds(centers.size() + 1);
  result.potentials.push_back(kmeans_potential(sorted, centers));

  for (std::size_t iter = 0; iter < opts.max_iters; ++iter) {
    // Assignment: sorted samples split into contiguous runs, one per center.
    bounds.front() = 0;
    bounds.back() = n;
    for (std::size_t i = 0; i + 1 < centers.size(); ++i) {
      const double lo = centers[i];
      const double hi = centers[i + 1];
      auto first = sorted.begin() + static_cast<std::ptrdiff_t>(bounds[i]);
      auto it = std::partition_point(first, sorted.end(), [&](double x) { return (x - lo) <= (hi - x); });
      bounds[i + 1] = static_cast<std::size_t>(it - sorted.begin());
    }
    // Update: each center moves to the mean of its run; empty runs keep theirs.
    double max_shift = 0.0;
    std::vector<double> next = centers;
    for (std::size_t i = 0; i < centers.size(); ++i) {
      const std::size_t a = bounds[i];
      const std::size_t b = bounds[i + 1];
      if (a == b) continue;
      double sum = 0.0;
      for (std::size_t j = a; j < b; ++j) sum += sorted[j];
      next[i] = sum / static_cast<double>(b - a);
      const double scale = std::max(std::abs(centers[i]), 1.0);
      max_shift = std::max(max_shift, std::abs(next[i] - centers[i]) / scale);
    }
    std::sort(next.begin(), next.end());
    centers = std::move(next);
    result.potentials.push_back(kmeans_potential(sorted, centers));
    result.iterations = iter + 1;
    if (max_shift < opts.tol) break;
  }
  result.centers = std::move(centers);
  return result;
}

/// How per-cluster statistics are combined into bucket-array weights.
struct AllocationPolicy {
  bool use_entropy = true;
  bool use_center = true;
  bool use_density = true;

  friend bool operator==(const AllocationPolicy&, const AllocationPolicy&) = default;
};

/// Trained grouping model: ascending centers and the per-cluster statistics
/// that drive bucket allocation. Centers are stored at 32-bit float
/// precision, which is also their serialized width.
struct ClusterModel {
  std::vector<double> centers;
  std::vector<double> entropy;        // normalized to [0,1]
  std::vector<double> center_weight;  // center / sum of centers
  std::vector<double> density;        // fraction of training samples
  std::vector<std::uint32_t> allocation;  // filled by allocate_buckets

  std::size_t k() const noexcept { return centers.size(); }

  std::size_t nearest_center(double value) const { return nearest_index(centers, value); }

  friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

/// Per-cluster entropy, center weight and density of `samples` under the
/// nearest-center assignment.
inline ClusterModel cluster_stats(std::span<const double> samples, std::span<const double> centers) {
  detail::validate_samples(samples);
  if (centers.empty()) throw InvalidInput("centers must not be empty");
  if (!std::is_sorted(centers.begin(), centers.end())) throw InvalidInput("centers must be ascending");

  const std::size_t k = centers.size();
  ClusterModel model;
  model.centers.assign(centers.begin(), centers.end());
  model.entropy.assign(k, 0.0);
  model.center_weight.assign(k, 0.0);
  model.density.assign(k, 0.0);

  std::vector<std::map<double, std::size_t>> freq(k);
  std::vector<std::size_t> count(k, 0);
  for (double x : samples) {
    const std::size_t i = nearest_index(centers, x);
    ++freq[i][x];
    ++count[i];
  }
  const double total = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < k; ++i) {
    model.density[i] = static_cast<double>(count[i]) / total;
    if (freq[i].size() > 1) {
      double h = 0.0;
      for (const auto& [value, c] : freq[i]) {
        const double f = static_cast<double>(c) / static_cast<double>(count[i]);
        h -= f * std::log2(f);
      }
      model.entropy[i] = std::clamp(h / std::log2(static_cast<double>(freq[i].size())), 0.0, 1.0);
    }
  }
  const double center_sum = std::accumulate(centers.begin(), centers.end(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    model.center_weight[i] = center_sum > 0.0 ? centers[i] / center_sum : 1.0 / static_cast<double>(k);
  }
  return model;
}

/// Splits `m` buckets across clusters in proportion to H_i * d_i * mu_i
/// (factors toggled by `policy`). Floors first, hands the remainder out by
/// largest fractional part, then lifts empty arrays to one bucket by taking
/// from the largest. All-zero weights fall back to a uniform split.
inline std::vector<std::uint32_t> allocate_buckets(const ClusterModel& model, std::uint32_t m,
                                                   const AllocationPolicy& policy = {}) {
  const std::size_t k = model.k();
  if (k == 0) throw InvalidInput("model has no clusters");
  if (m < k) throw InvalidInput("m must be at least the number of clusters");

  std::vector<double> w(k, 1.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (policy.use_entropy) w[i] *= model.entropy.at(i);
    if (policy.use_center) w[i] *= model.center_weight.at(i);
    if (policy.use_density) w[i] *= model.density.at(i);
  }
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) {
    std::fill(w.begin(), w.end(), 1.0);
    total = static_cast<double>(k);
  }

  std::vector<std::uint32_t> alloc(k, 0);
  std::vector<double> frac(k, 0.0);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double q = w[i] / total * static_cast<double>(m);
    const double fl = std::floor(q + 1e-9);
    alloc[i] = static_cast<std::uint32_t>(std::min(fl, static_cast<double>(m)));
    frac[i] = q - fl;
    assigned += alloc[i];
  }
  while (assigned > m) {  // rounding guard
    auto it = std::max_element(alloc.begin(), alloc.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t j = 0; assigned < m; j = (j + 1) % k) {
    ++alloc[order[j]];
    ++assigned;
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (alloc[i] > 0) continue;
    auto donor = std::max_element(alloc.begin(), alloc.end());
    --*donor;
    alloc[i] = 1;
  }
  return alloc;
}

struct TrainOptions {
  std::size_t k = 30;
  KMeansOptions kmeans;
  AllocationPolicy policy;
};

/// Offline training end to end: Lloyd's algorithm, float quantization of the
/// centers, merge of duplicate centers, then statistics on the samples.
inline ClusterModel train_model(std::span<const double> samples, const TrainOptions& opts) {
  if (opts.k > kMaxClusters) throw InvalidInput("at most 256 clusters are supported");
  auto km = train_kmeans(samples, opts.k, opts.kmeans);
  std::vector<double> centers;
  for (double c : km.centers) {
    const double q = static_cast<double>(static_cast<float>(c));
    if (centers.empty() || centers.back() != q) centers.push_back(q);
  }
  return cluster_stats(samples, centers);
}

// ---------------------------------------------------------------------------
// Serialization: JSON for humans, binary for the sketch container.

inline nlohmann::json to_json(const ClusterModel& m) {
  nlohmann::json j;
  j["version"] = 1;
  std::vector<float> centers(m.centers.begin(), m.centers.end());
  j["centers"] = centers;
  j["entropy"] = m.entropy;
  j["center_weight"] = m.center_weight;
  j["density"] = m.density;
  j["allocation"] = m.allocation;
  return j;
}

inline ClusterModel model_from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw InvalidInput("unsupported cluster model version");
  ClusterModel m;
  for (float c : j.at("centers").get<std::vector<float>>()) m.centers.push_back(c);
  m.entropy = j.at("entropy").get<std::vector<double>>();
  m.center_weight = j.at("center_weight").get<std::vector<double>>();
  m.density = j.at("density").get<std::vector<double>>();
  m.allocation = j.value("allocation", std::vector<std::uint32_t>{});
  const std::size_t k = m.centers.size();
  if (k == 0 || k > kMaxClusters || m.entropy.size() != k || m.center_weight.size() != k ||
      m.density.size() != k || (!m.allocation.empty() && m.allocation.size() != k) ||
      !std::is_sorted(m.centers.begin(), m.centers.end())) {
    throw InvalidInput("inconsistent cluster model document");
  }
  return m;
}

}  // namespace lss
