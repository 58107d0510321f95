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
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "lss/common.hpp"

namespace lss::bench {

/// Raised when a metric has no defined value (relative error against zero).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline double relative_error(double truth, double estimate) {
  if (truth == 0.0) throw UndefinedMetric("relative error is undefined for a zero ground truth");
  return std::abs(truth - estimate) / std::abs(truth);
}

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }

  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }

  /// Harmonic mean of precision and recall; 0 whenever P + R = 0, which
  /// includes two empty sets.
  double f1() const {
    const double p = precision();
    const double r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

/// Compares two sets given as sorted, duplicate-free ranges.
template <class T>
Confusion confusion(std::span<const T> truth, std::span<const T> predicted) {
  Confusion c;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < truth.size() && j < predicted.size()) {
    if (truth[i] < predicted[j]) {
      ++c.fn;
      ++i;
    } else if (predicted[j] < truth[i]) {
      ++c.fp;
      ++j;
    } else {
      ++c.tp;
      ++i;
      ++j;
    }
  }
  c.fn += truth.size() - i;
  c.fp += predicted.size() - j;
  return c;
}

template <class T>
double f1_score(std::vector<T> truth, std::vector<T> predicted) {
  std::sort(truth.begin(), truth.end());
  truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
  std::sort(predicted.begin(), predicted.end());
  predicted.erase(std::unique(predicted.begin(), predicted.end()), predicted.end());
  return confusion<T>(truth, predicted).f1();
}

inline double f1_from(double precision, double recall) {
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

/// Nearest-rank percentile (p in [0, 100]); always one of the samples.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidInput("percentile of an empty set");
  if (!(p >= 0.0 && p <= 100.0)) throw InvalidInput("percentile must be within [0, 100]");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[rank == 0 ? 0 : rank - 1];
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace lss::bench
