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

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>

#include "evcsi/augment.hpp"
#include "evcsi/errors.hpp"
#include "evcsi/metrics.hpp"
#include "support.hpp"

using namespace evcsi;
using evcsi::testing::random_sample;

namespace {

CsiSample labelled(int n_tx, int n_sb) {
  CsiSample s{CMatrix(n_tx, n_sb)};
  for (int k = 0; k < n_sb; ++k) {
    for (int r = 0; r < n_tx; ++r) s.w(r, k) = Complex(k, r);
  }
  return s;
}

}  // namespace

TEST_CASE("flips reverse one axis and are involutions") {
  const CsiSample s = labelled(2, 3);
  const CsiSample f = flip_subband(s);
  CHECK(f.w(0, 0) == Complex(2, 0));
  CHECK(f.w(1, 2) == Complex(0, 1));
  CHECK(flip_subband(f) == s);
  const CsiSample a = flip_antenna(s);
  CHECK(a.w(0, 1) == Complex(1, 1));
  CHECK(flip_antenna(a) == s);
}

TEST_CASE("cyclic shift moves column k to k + p") {
  const CsiSample s = labelled(1, 4);
  const CsiSample c = cyclic_shift(s, 1);
  CHECK(c.w(0, 0) == Complex(3, 0));
  CHECK(c.w(0, 1) == Complex(0, 0));
  CHECK(cyclic_shift(s, 0) == s);
  CHECK(cyclic_shift(cyclic_shift(s, 3), 1) == s);
  CHECK_THROWS_AS(cyclic_shift(s, 4), ContractError);
  CHECK_THROWS_AS(cyclic_shift(s, -1), ContractError);
}

TEST_CASE("cyclic shift preserves cyclic adjacency") {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const CsiSample s = random_sample(rng);
    const int p = std::uniform_int_distribution<int>(0, 11)(rng);
    const CsiSample c = cyclic_shift(s, p);
    for (int k = 0; k < 12; ++k) {
      CHECK(c.w.col((k + p) % 12) == s.w.col(k));
      CHECK(c.w.col((k + 1 + p) % 12) == s.w.col((k + 1) % 12));
    }
  }
}

TEST_CASE("permutation follows output-from-input convention") {
  const CsiSample s = labelled(1, 3);
  const int perm[] = {2, 0, 1};
  const CsiSample p = permute_subbands(s, perm);
  CHECK(p.w(0, 0) == Complex(2, 0));
  CHECK(p.w(0, 1) == Complex(0, 0));
  CHECK(p.w(0, 2) == Complex(1, 0));
  const int bad[] = {0, 0, 1};
  CHECK_THROWS_AS(permute_subbands(s, bad), ContractError);
}

TEST_CASE("shuffle is uniform over permutations") {
  const CsiSample s = labelled(1, 3);
  Rng rng(2);
  std::map<std::vector<int>, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    std::vector<int> perm;
    const CsiSample out = random_shuffle(s, rng, &perm);
    CHECK(out == permute_subbands(s, perm));
    ++counts[perm];
  }
  REQUIRE(counts.size() == 6);
  double chi2 = 0.0;
  const double expect = draws / 6.0;
  for (const auto& [perm, n] : counts) chi2 += (n - expect) * (n - expect) / expect;
  // 5 degrees of freedom, 0.1% critical value.
  CHECK(chi2 < 20.52);
}

TEST_CASE("rotation by a right angle maps re to im") {
  CsiSample s{CMatrix(1, 2)};
  s.w(0, 0) = Complex(1, 0);
  s.w(0, 1) = Complex(0, 2);
  const double quarter[] = {std::numbers::pi / 2};
  const CsiSample r = rotate(s, quarter);
  CHECK(std::abs(r.w(0, 0) - Complex(0, 1)) < 1e-15);
  CHECK(std::abs(r.w(0, 1) - Complex(-2, 0)) < 1e-15);
  const double two[] = {0.0, std::numbers::pi};
  const CsiSample r2 = rotate(s, two);
  CHECK(r2.w(0, 0) == s.w(0, 0));
  CHECK(std::abs(r2.w(0, 1) - Complex(0, -2)) < 1e-15);
  const double three[] = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(rotate(s, three), ContractError);
}

TEST_CASE("transforms preserve norms and per-column sgcs") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const CsiSample s = random_sample(rng);
    const CsiSample r = random_rotate(s, true, rng);
    for (int k = 0; k < 12; ++k) {
      CHECK(r.w.col(k).norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(squared_cosine(r.w.col(k), s.w.col(k)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(flip_subband(s).w.norm() == doctest::Approx(s.w.norm()).epsilon(1e-14));
    CHECK(random_shuffle(s, rng).w.norm() == doctest::Approx(s.w.norm()).epsilon(1e-14));
  }
}

TEST_CASE("shared rotation angle") {
  Rng rng(4);
  const CsiSample s = random_sample(rng);
  const CsiSample r = random_rotate(s, false, rng);
  const Complex f0 = r.w(0, 0) / s.w(0, 0);
  for (int k = 1; k < 12; ++k) CHECK(std::abs(r.w(0, k) / s.w(0, k) - f0) < 1e-12);
}

TEST_CASE("noise variance") {
  CsiSample zero{CMatrix::Zero(8, 12)};
  Rng rng(5);
  const double alpha = 0.3, sigma = 2.0;
  double acc = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 500; ++i) {
    const CsiSample out = noise_inject(zero, alpha, sigma, rng);
    for (int k = 0; k < 12; ++k) {
      for (int r = 0; r < 8; ++r) {
        acc += out.w(r, k).real() * out.w(r, k).real() + out.w(r, k).imag() * out.w(r, k).imag();
        n += 2;
      }
    }
  }
  CHECK(acc / static_cast<double>(n) == doctest::Approx(alpha * alpha * sigma * sigma).epsilon(0.05));
  CHECK(noise_inject(zero, 0.0, sigma, rng) == zero);
}

TEST_CASE("augment_sample targets") {
  Rng rng(6);
  const CsiSample s = random_sample(rng);
  AugmentConfig cfg;
  cfg.noise_alpha = 0.1;
  std::map<AugmentKind, int> kinds;
  for (int i = 0; i < 400; ++i) {
    const AugmentedPair clean = augment_sample(s, cfg, false, rng);
    ++kinds[clean.kind];
    CHECK(clean.noisy);
    CHECK_FALSE(clean.input == clean.target);
    // The target is a permutation or rotation of the original, noise-free.
    for (int k = 0; k < 12; ++k) CHECK(clean.target.w.col(k).norm() == doctest::Approx(1.0).epsilon(1e-12));
    const AugmentedPair noisy = augment_sample(s, cfg, true, rng);
    CHECK(noisy.input == noisy.target);
  }
  CHECK(kinds.size() == 4);
  CHECK(kinds.count(AugmentKind::kNone) == 0);

  cfg = AugmentConfig{};
  cfg.p_flip = cfg.p_cyclic = cfg.p_shuffle = cfg.p_rotate = 0.0;
  const AugmentedPair none = augment_sample(s, cfg, false, rng);
  CHECK(none.kind == AugmentKind::kNone);
  CHECK(none.input == s);
  CHECK(none.target == s);
  cfg.p_flip = 1.0;
  const AugmentedPair flip = augment_sample(s, cfg, false, rng);
  CHECK(flip.input == flip_subband(s));
  CHECK(flip.target == flip.input);
}

TEST_CASE("augment config") {
  AugmentConfig cfg;
  cfg.p_flip = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AugmentConfig{};
  cfg.noise_alpha = 0.05;
  cfg.rotate_per_subband = false;
  KeyValueConfig kv;
  cfg.to_kv(kv);
  AugmentConfig back;
  back.update_from(kv);
  CHECK(back.noise_alpha == 0.05);
  CHECK_FALSE(back.rotate_per_subband);
  for (const auto& k : AugmentConfig::keys()) CHECK(kv.has(k));
}
