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

#include "evcsi/codebook.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "evcsi/errors.hpp"

namespace evcsi {

void CodebookConfig::validate() const {
  if (n_tx < 1 || oversampling < 1 || n_beams() < 2) {
    throw ConfigError("CodebookConfig: need n_tx >= 1, oversampling >= 1 and at least 2 beams");
  }
}

int CodebookConfig::bits_per_subband() const {
  int b = 0;
  while ((1 << b) < n_beams()) ++b;
  return b;
}

Codebook build_dft_codebook(const CodebookConfig& cfg) {
  cfg.validate();
  Codebook cb{cfg, CMatrix(cfg.n_tx, cfg.n_beams())};
  const double norm = 1.0 / std::sqrt(static_cast<double>(cfg.n_tx));
  for (int m = 0; m < cfg.n_beams(); ++m) {
    for (int n = 0; n < cfg.n_tx; ++n) {
      // Reduce n m modulo the grid size first to keep the angle small.
      const double phase = 2.0 * std::numbers::pi * static_cast<double>((n * m) % cfg.n_beams()) / cfg.n_beams();
      cb.beams(n, m) = std::polar(norm, phase);
    }
  }
  return cb;
}

std::vector<int> codebook_encode(const CsiSample& w, const Codebook& cb) {
  if (w.n_tx() != cb.cfg.n_tx) {
    throw DimensionMismatchError("codebook_encode: sample has " + std::to_string(w.n_tx()) + " antennas, codebook " +
                                 std::to_string(cb.cfg.n_tx));
  }
  const Eigen::MatrixXd gains = (cb.beams.adjoint() * w.w).cwiseAbs();
  std::vector<int> idx(w.n_subband());
  for (int k = 0; k < w.n_subband(); ++k) {
    int best = 0;
    for (int m = 1; m < gains.rows(); ++m) {
      if (gains(m, k) > gains(best, k)) best = m;
    }
    idx[k] = best;
  }
  return idx;
}

CsiSample codebook_decode(std::span<const int> indices, const Codebook& cb) {
  CsiSample s{CMatrix(cb.cfg.n_tx, static_cast<Eigen::Index>(indices.size()))};
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= cb.cfg.n_beams()) {
      throw ContractError("codebook_decode: beam index " + std::to_string(indices[k]) + " out of range");
    }
    s.w.col(static_cast<Eigen::Index>(k)) = cb.beams.col(indices[k]);
  }
  return s;
}

int codebook_feedback_bits(const Codebook& cb, int n_subband) { return n_subband * cb.cfg.bits_per_subband(); }

}  // namespace evcsi
