// SPDX-License-Identifier: Apache-2.0
//
// evcsi: eigenvector CSI feedback with a Transformer autoencoder
// Copyright (C) 2026 The evcsi authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evcsi/channelgen.hpp"
#include "evcsi/ndiff.hpp"
#include "evcsi/rng.hpp"

namespace evcsi::testing {

inline CMatrix random_cmatrix(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = Complex(g(rng), g(rng));
  }
  return m;
}

// Unit-norm, phase-canonical columns.
inline CsiSample random_sample(Rng& rng, int n_tx = 8, int n_subband = 12) {
  CsiSample s{random_cmatrix(rng, n_tx, n_subband)};
  for (int k = 0; k < n_subband; ++k) {
    s.w.col(k).normalize();
    canonicalize_phase(s.w.col(k));
  }
  return s;
}

inline std::vector<CsiSample> random_samples(Rng& rng, std::size_t n, int n_tx = 8, int n_subband = 12) {
  std::vector<CsiSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_sample(rng, n_tx, n_subband));
  return out;
}

inline std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline ndiff::DiffTensor random_param(Rng& rng, ndiff::Shape shape, double lo = -1.0, double hi = 1.0) {
  const std::size_t n = ndiff::numel(shape);
  return ndiff::DiffTensor::parameter(std::move(shape), random_values(rng, n, lo, hi));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("evcsi_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace evcsi::testing
