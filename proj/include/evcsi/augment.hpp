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

#include <span>
#include <vector>

#include "evcsi/channelgen.hpp"
#include "evcsi/config.hpp"
#include "evcsi/rng.hpp"

namespace evcsi {

struct AugmentConfig {
  double noise_alpha = 0.0;
  double noise_sigma = 1.0;
  // Mutually exclusive per-sample draw; the four must sum to at most 1.
  double p_flip = 0.25;
  double p_cyclic = 0.25;
  double p_shuffle = 0.25;
  double p_rotate = 0.25;
  bool rotate_per_subband = true;

  void validate() const;
  void to_kv(KeyValueConfig& kv) const;
  // Reads whichever augmentation keys are present.
  void update_from(const KeyValueConfig& kv);
  static const std::set<std::string>& keys();
};

// W + alpha * (X + jY), X, Y ~ N(0, sigma^2) entrywise. Not renormalized.
CsiSample noise_inject(const CsiSample& w, double alpha, double sigma, Rng& rng);

// Reverses the subband order.
CsiSample flip_subband(const CsiSample& w);
// Reverses the antenna order within every subband.
CsiSample flip_antenna(const CsiSample& w);

// Output column (k + p) mod n_subband takes input column k; 0 <= p < n_subband.
CsiSample cyclic_shift(const CsiSample& w, int p);

// Output column k takes input column perm[k].
CsiSample permute_subbands(const CsiSample& w, std::span<const int> perm);
// Uniformly random subband permutation; the permutation is returned through
// `perm_out` when given.
CsiSample random_shuffle(const CsiSample& w, Rng& rng, std::vector<int>* perm_out = nullptr);

// w_k <- exp(j theta_k) w_k written as the cos/sin mixing of real and
// imaginary parts. `thetas` holds one angle for all subbands or one each.
CsiSample rotate(const CsiSample& w, std::span<const double> thetas);
CsiSample random_rotate(const CsiSample& w, bool per_subband, Rng& rng);

enum class AugmentKind { kNone, kFlip, kCyclic, kShuffle, kRotate };

struct AugmentedPair {
  CsiSample input;
  CsiSample target;
  AugmentKind kind = AugmentKind::kNone;
  bool noisy = false;
};

// Draws at most one of flip / cyclic shift / shuffle / rotate, then adds
// noise when noise_alpha > 0. The target follows the permutation-type
// transforms; for noise it stays clean unless `noisy_target` is set.
AugmentedPair augment_sample(const CsiSample& w, const AugmentConfig& cfg, bool noisy_target, Rng& rng);

}  // namespace evcsi
