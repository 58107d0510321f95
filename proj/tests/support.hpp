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
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lss/bench/trace.hpp"
#include "lss/clustering.hpp"

namespace lss::testing {

/// Model whose centers are exactly `centers`, each seen once in training,
/// so every cluster has zero entropy and the allocation is uniform.
inline ClusterModel model_with_centers(std::vector<double> centers) {
  return cluster_stats(centers, centers);
}

/// Zipf(s) draws over a wide support, as doubles.
inline std::vector<double> zipf_samples(std::size_t n, double s, std::uint64_t seed, std::uint64_t max = 100000) {
  bench::ZipfSampler z(s, max);
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = static_cast<double>(z(rng));
  return out;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("lss-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace lss::testing
