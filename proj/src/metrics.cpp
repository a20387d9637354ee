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

#include "evcsi/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "evcsi/errors.hpp"

namespace evcsi {

std::string EvalReport::csv_row() const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%zu", sgcs, mse, nmse_db, n_samples);
  return buf;
}

double squared_cosine(const CVector& a, const CVector& b) {
  if (a.size() != b.size()) throw ContractError("squared_cosine: length mismatch");
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInputError("squared_cosine: zero-norm column");
  const double inner = std::norm(a.dot(b));
  return std::min(1.0, inner / (na * nb));
}

namespace {

void check_shapes(const CsiSample& t, const CsiSample& p) {
  if (t.n_tx() != p.n_tx() || t.n_subband() != p.n_subband()) {
    throw ContractError("sgcs: sample shape mismatch");
  }
}

}  // namespace

double sample_sgcs(const CsiSample& truth, const CsiSample& pred) {
  check_shapes(truth, pred);
  double acc = 0.0;
  for (int k = 0; k < truth.n_subband(); ++k) {
    try {
      acc += squared_cosine(truth.w.col(k), pred.w.col(k));
    } catch (const DegenerateInputError&) {
      throw DegenerateInputError("sgcs: zero-norm column at subband " + std::to_string(k));
    }
  }
  return acc / truth.n_subband();
}

double sgcs(std::span<const CsiSample> truth, std::span<const CsiSample> pred) {
  if (truth.size() != pred.size()) throw ContractError("sgcs: set sizes differ");
  if (truth.empty()) throw ContractError("sgcs: empty sets");
  double acc = 0.0;
  std::size_t terms = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    check_shapes(truth[i], pred[i]);
    for (int k = 0; k < truth[i].n_subband(); ++k) {
      try {
        acc += squared_cosine(truth[i].w.col(k), pred[i].w.col(k));
      } catch (const DegenerateInputError&) {
        throw DegenerateInputError("sgcs: zero-norm column at sample " + std::to_string(i) +
                                   ", subband " + std::to_string(k));
      }
      ++terms;
    }
  }
  return acc / static_cast<double>(terms);
}

double mse(std::span<const double> v, std::span<const double> v2) {
  if (v.size() != v2.size()) throw ContractError("mse: length mismatch");
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - v2[i];
    acc += d * d;
  }
  return acc / static_cast<double>(v.size());
}

double nmse(std::span<const double> v, std::span<const double> v2) {
  if (v.size() != v2.size()) throw ContractError("nmse: length mismatch");
  double err = 0.0;
  double ref = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - v2[i];
    err += d * d;
    ref += v[i] * v[i];
  }
  if (!(ref > 0.0)) throw DegenerateInputError("nmse: reference vector is all zero");
  return err / ref;
}

std::vector<double> split_real(const CsiSample& s) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(2 * s.n_tx() * s.n_subband()));
  for (int k = 0; k < s.n_subband(); ++k) {
    for (int n = 0; n < s.n_tx(); ++n) out.push_back(s.w(n, k).real());
    for (int n = 0; n < s.n_tx(); ++n) out.push_back(s.w(n, k).imag());
  }
  return out;
}

EvalReport evaluate(std::span<const CsiSample> truth, std::span<const CsiSample> pred) {
  EvalReport r;
  r.sgcs = sgcs(truth, pred);
  r.n_samples = truth.size();
  std::vector<double> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto ta = split_real(truth[i]);
    const auto pb = split_real(pred[i]);
    a.insert(a.end(), ta.begin(), ta.end());
    b.insert(b.end(), pb.begin(), pb.end());
  }
  r.mse = mse(a, b);
  r.nmse_db = 10.0 * std::log10(nmse(a, b));
  return r;
}

}  // namespace evcsi
