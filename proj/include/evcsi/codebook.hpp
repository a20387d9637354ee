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

#include <cstddef>
#include <span>
#include <vector>

#include "evcsi/channelgen.hpp"

namespace evcsi {

// DFT grid of beams; labelled "DFT-grid" wherever results are reported.
struct CodebookConfig {
  int n_tx = 8;
  int oversampling = 4;

  void validate() const;
  int n_beams() const { return oversampling * n_tx; }
  int bits_per_subband() const;
};

struct Codebook {
  CodebookConfig cfg;
  CMatrix beams;  // n_tx x n_beams, unit-norm columns
};

// Beam m, entry n: exp(j 2 pi n m / (O n_tx)) / sqrt(n_tx).
Codebook build_dft_codebook(const CodebookConfig& cfg);

// Per subband argmax_m |w_k^H b_m| (lowest index on ties).
std::vector<int> codebook_encode(const CsiSample& w, const Codebook& cb);
CsiSample codebook_decode(std::span<const int> indices, const Codebook& cb);

int codebook_feedback_bits(const Codebook& cb, int n_subband);

}  // namespace evcsi
