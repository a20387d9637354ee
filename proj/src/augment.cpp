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

#include "evcsi/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "evcsi/errors.hpp"

namespace evcsi {

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("AugmentConfig: ") + name + " must lie in [0, 1]");
  };
  prob(p_flip, "p_flip");
  prob(p_cyclic, "p_cyclic");
  prob(p_shuffle, "p_shuffle");
  prob(p_rotate, "p_rotate");
  if (p_flip + p_cyclic + p_shuffle + p_rotate > 1.0 + 1e-12) {
    throw ConfigError("AugmentConfig: p_flip + p_cyclic + p_shuffle + p_rotate must not exceed 1");
  }
  if (!(noise_alpha >= 0.0) || !(noise_sigma >= 0.0)) {
    throw ConfigError("AugmentConfig: noise_alpha and noise_sigma must be >= 0");
  }
}

const std::set<std::string>& AugmentConfig::keys() {
  static const std::set<std::string> k{"noise_alpha", "noise_sigma", "p_flip",           "p_cyclic",
                                       "p_shuffle",   "p_rotate",    "rotate_per_subband"};
  return k;
}

void AugmentConfig::to_kv(KeyValueConfig& kv) const {
  kv.set("noise_alpha", noise_alpha);
  kv.set("noise_sigma", noise_sigma);
  kv.set("p_flip", p_flip);
  kv.set("p_cyclic", p_cyclic);
  kv.set("p_shuffle", p_shuffle);
  kv.set("p_rotate", p_rotate);
  kv.set("rotate_per_subband", std::string(rotate_per_subband ? "true" : "false"));
}

void AugmentConfig::update_from(const KeyValueConfig& kv) {
  if (kv.has("noise_alpha")) noise_alpha = kv.get_double("noise_alpha");
  if (kv.has("noise_sigma")) noise_sigma = kv.get_double("noise_sigma");
  if (kv.has("p_flip")) p_flip = kv.get_double("p_flip");
  if (kv.has("p_cyclic")) p_cyclic = kv.get_double("p_cyclic");
  if (kv.has("p_shuffle")) p_shuffle = kv.get_double("p_shuffle");
  if (kv.has("p_rotate")) p_rotate = kv.get_double("p_rotate");
  if (kv.has("rotate_per_subband")) rotate_per_subband = kv.get_bool("rotate_per_subband");
  validate();
}

CsiSample noise_inject(const CsiSample& w, double alpha, double sigma, Rng& rng) {
  if (!(alpha >= 0.0) || !(sigma >= 0.0)) throw ConfigError("noise_inject: alpha and sigma must be >= 0");
  CsiSample out = w;
  if (alpha == 0.0) return out;
  std::normal_distribution<double> g(0.0, 1.0);
  for (Eigen::Index k = 0; k < out.w.cols(); ++k) {
    for (Eigen::Index n = 0; n < out.w.rows(); ++n) {
      const double re = g(rng);
      const double im = g(rng);
      out.w(n, k) += alpha * sigma * Complex(re, im);
    }
  }
  return out;
}

CsiSample flip_subband(const CsiSample& w) {
  return CsiSample{w.w.rowwise().reverse()};
}

CsiSample flip_antenna(const CsiSample& w) {
  return CsiSample{w.w.colwise().reverse()};
}

CsiSample cyclic_shift(const CsiSample& w, int p) {
  const int n = w.n_subband();
  if (p < 0 || p >= n) {
    throw ContractError("cyclic_shift: shift " + std::to_string(p) + " outside [0, " + std::to_string(n) + ")");
  }
  CsiSample out = w;
  for (int k = 0; k < n; ++k) out.w.col((k + p) % n) = w.w.col(k);
  return out;
}

CsiSample permute_subbands(const CsiSample& w, std::span<const int> perm) {
  if (static_cast<int>(perm.size()) != w.n_subband()) throw ContractError("permute_subbands: length mismatch");
  std::vector<bool> seen(perm.size(), false);
  CsiSample out = w;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    if (perm[k] < 0 || perm[k] >= w.n_subband()) throw ContractError("permute_subbands: index out of range");
    if (seen[perm[k]]) throw ContractError("permute_subbands: repeated index");
    seen[perm[k]] = true;
    out.w.col(static_cast<Eigen::Index>(k)) = w.w.col(perm[k]);
  }
  return out;
}

CsiSample random_shuffle(const CsiSample& w, Rng& rng, std::vector<int>* perm_out) {
  std::vector<int> perm(w.n_subband());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  CsiSample out = permute_subbands(w, perm);
  if (perm_out) *perm_out = std::move(perm);
  return out;
}

CsiSample rotate(const CsiSample& w, std::span<const double> thetas) {
  const auto n_sb = static_cast<std::size_t>(w.n_subband());
  if (thetas.size() != 1 && thetas.size() != n_sb) {
    throw ContractError("rotate: expected 1 or " + std::to_string(n_sb) + " angles");
  }
  CsiSample out = w;
  for (std::size_t k = 0; k < n_sb; ++k) {
    const double theta = thetas.size() == 1 ? thetas[0] : thetas[k];
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (Eigen::Index n = 0; n < w.w.rows(); ++n) {
      const double re = w.w(n, static_cast<Eigen::Index>(k)).real();
      const double im = w.w(n, static_cast<Eigen::Index>(k)).imag();
      out.w(n, static_cast<Eigen::Index>(k)) = Complex(c * re - s * im, s * re + c * im);
    }
  }
  return out;
}

CsiSample random_rotate(const CsiSample& w, bool per_subband, Rng& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<double> thetas(per_subband ? w.n_subband() : 1);
  for (auto& t : thetas) t = angle(rng);
  return rotate(w, thetas);
}

AugmentedPair augment_sample(const CsiSample& w, const AugmentConfig& cfg, bool noisy_target, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  AugmentedPair pair;
  double edge = cfg.p_flip;
  if (draw < edge) {
    pair.kind = AugmentKind::kFlip;
    pair.input = flip_subband(w);
  } else if (draw < (edge += cfg.p_cyclic)) {
    pair.kind = AugmentKind::kCyclic;
    const int n = w.n_subband();
    const int p = n > 1 ? std::uniform_int_distribution<int>(1, n - 1)(rng) : 0;
    pair.input = cyclic_shift(w, p);
  } else if (draw < (edge += cfg.p_shuffle)) {
    pair.kind = AugmentKind::kShuffle;
    pair.input = random_shuffle(w, rng);
  } else if (draw < (edge += cfg.p_rotate)) {
    pair.kind = AugmentKind::kRotate;
    pair.input = random_rotate(w, cfg.rotate_per_subband, rng);
  } else {
    pair.input = w;
  }
  pair.target = pair.input;
  if (cfg.noise_alpha > 0.0) {
    pair.noisy = true;
    pair.input = noise_inject(pair.input, cfg.noise_alpha, cfg.noise_sigma, rng);
    if (noisy_target) pair.target = pair.input;
  }
  return pair;
}

}  // namespace evcsi
