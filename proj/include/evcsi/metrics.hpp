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
#include <string>
#include <vector>

#include "evcsi/channelgen.hpp"

namespace evcsi {

struct EvalReport {
  double sgcs = 0.0;
  double mse = 0.0;
  double nmse_db = 0.0;
  std::size_t n_samples = 0;

  // "sgcs,mse,nmse_db,n_samples" with round-trip precision.
  std::string csv_row() const;
  static std::string csv_header() { return "sgcs,mse,nmse_db,n_samples"; }
};

// Squared generalized cosine similarity |a^H b|^2 / (|a|^2 |b|^2) of one
// column pair. Throws DegenerateInputError on a zero-norm column.
double squared_cosine(const CVector& a, const CVector& b);

// Mean over subbands for one sample.
double sample_sgcs(const CsiSample& truth, const CsiSample& pred);

// Mean over samples and subbands, accumulated sequentially in index order.
double sgcs(std::span<const CsiSample> truth, std::span<const CsiSample> pred);

double mse(std::span<const double> v, std::span<const double> v2);
double nmse(std::span<const double> v, std::span<const double> v2);

// Real/imaginary split [Re(w); Im(w)] flattened subband by subband.
std::vector<double> split_real(const CsiSample& s);

EvalReport evaluate(std::span<const CsiSample> truth, std::span<const CsiSample> pred);

}  // namespace evcsi
