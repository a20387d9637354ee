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

#include <Eigen/Eigenvalues>
#include <fstream>
#include <sstream>

#include "evcsi/channelgen.hpp"
#include "evcsi/errors.hpp"
#include "evcsi/metrics.hpp"
#include "support.hpp"

using namespace evcsi;
using evcsi::testing::random_cmatrix;

namespace {

// Out of line: GCC 11 at -O3 vectorizes the inline cast away.
[[gnu::noinline]] double to_f32(double x) { return static_cast<float>(x); }

// Independent dense Hermitian eigendecomposition.
CVector oracle_eigenvector(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h.adjoint() * h);
  return es.eigenvectors().col(es.eigenvalues().size() - 1);
}

double overlap(const CVector& a, const CVector& b) {
  return std::norm(a.dot(b)) / (a.squaredNorm() * b.squaredNorm());
}

}  // namespace

TEST_CASE("power iteration agrees with a dense eigensolver") {
  Rng rng(11);
  std::uniform_int_distribution<int> rows(1, 8), cols(2, 32);
  for (int trial = 0; trial < 300; ++trial) {
    const CMatrix h = random_cmatrix(rng, rows(rng), cols(rng));
    const EigenPair p = dominant_eigenvector(h);
    CHECK(overlap(p.w, oracle_eigenvector(h)) >= 1.0 - 1e-8);
    CHECK(p.w.norm() == doctest::Approx(1.0).epsilon(1e-12));
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h.adjoint() * h);
    CHECK(p.lambda == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-9));
  }
}

TEST_CASE("rank-one channel returns its right singular direction") {
  Rng rng(3);
  const CVector u = random_cmatrix(rng, 2, 1).col(0);
  const CVector v = random_cmatrix(rng, 8, 1).col(0);
  const CMatrix h = u * v.adjoint();
  const EigenPair p = dominant_eigenvector(h);
  CHECK(overlap(p.w, v) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.lambda == doctest::Approx(u.squaredNorm() * v.squaredNorm()).epsilon(1e-10));
}

TEST_CASE("degenerate channels are rejected") {
  CHECK_THROWS_AS(dominant_eigenvector(CMatrix::Zero(2, 8)), DegenerateInputError);
  CMatrix h = CMatrix::Ones(2, 4);
  h(0, 0) = Complex(std::nan(""), 0.0);
  CHECK_THROWS_AS(dominant_eigenvector(h), DegenerateInputError);
}

TEST_CASE("identity-like channel with a uniform start still converges") {
  // The all-ones start vector is orthogonal to the dominant direction here.
  CMatrix h = CMatrix::Zero(1, 2);
  h(0, 0) = 1.0;
  h(0, 1) = -1.0;
  const EigenPair p = dominant_eigenvector(h);
  CHECK(overlap(p.w, oracle_eigenvector(h)) >= 1.0 - 1e-10);
}

TEST_CASE("canonical phase") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    CVector v = random_cmatrix(rng, 8, 1).col(0);
    const CVector c = canonical_phase(v);
    Eigen::Index arg = 0;
    c.cwiseAbs().maxCoeff(&arg);
    CHECK(c(arg).imag() == 0.0);
    CHECK(c(arg).real() >= 0.0);
    CHECK(canonical_phase(c) == c);
    CHECK(overlap(c, v) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("ties go to the lowest index") {
    CVector v(3);
    v << Complex(0, 1), Complex(0.5, 0), Complex(-1, 0);
    const CVector c = canonical_phase(v);
    CHECK(c(0) == Complex(1, 0));
    CHECK(c(2).real() == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("channel parameters") {
  ChannelParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.subband_offset_hz(0) == doctest::Approx(-5.5 * 4 * 12 * 15e3));
  CHECK(p.subband_offset_hz(11) == doctest::Approx(5.5 * 4 * 12 * 15e3));
  CHECK(channel_profile("flat").delay_spread == 0.0);
  CHECK(channel_profile("selective").delay_spread > channel_profile("desk").delay_spread);
  CHECK_THROWS_AS(channel_profile("cdl"), ConfigError);
  ChannelParams bad;
  bad.n_tx = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ChannelParams{};
  bad.delay_spread = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("flat channels give identical subband eigenvectors") {
  const ChannelParams p = channel_profile("flat");
  for (std::uint64_t i = 0; i < 10; ++i) {
    const CsiSample s = extract_csi(synth_freq_channel(p, 21, i));
    for (int k = 1; k < s.n_subband(); ++k) CHECK((s.w.col(k) - s.w.col(0)).norm() < 1e-9);
  }
}

TEST_CASE("selective channels decorrelate across the band") {
  const ChannelParams p = channel_profile("selective");
  double edge = 0.0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const CsiSample s = extract_csi(synth_freq_channel(p, 4, i));
    edge += overlap(s.w.col(0), s.w.col(s.n_subband() - 1));
  }
  CHECK(edge / n < 0.9);
}

TEST_CASE("extracted samples are unit-norm and canonical") {
  const ChannelParams p;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const CsiSample s = extract_csi(synth_freq_channel(p, 1, i));
    REQUIRE(s.n_tx() == p.n_tx);
    REQUIRE(s.n_subband() == p.n_subband);
    for (int k = 0; k < s.n_subband(); ++k) {
      CHECK(s.w.col(k).norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(canonical_phase(s.w.col(k)) == CVector(s.w.col(k)));
    }
  }
}

TEST_CASE("generation is a pure function of (seed, index)") {
  const ChannelParams p;
  const Dataset a = build_dataset(p, 30, 9);
  const Dataset b = build_dataset(p, 10, 9);
  for (std::size_t i = 0; i < 10; ++i) CHECK(a.samples[i] == b.samples[i]);
  const Dataset c = build_dataset(p, 10, 10);
  CHECK_FALSE(a.samples[0] == c.samples[0]);
}

TEST_CASE("train/validation split") {
  Dataset d = build_dataset(ChannelParams{}, 101, 2);
  d.split_seed = 17;
  const auto tr = d.train_indices();
  const auto va = d.validation_indices();
  CHECK(tr.size() == 81);
  CHECK(va.size() == 20);
  std::vector<std::size_t> all = tr;
  all.insert(all.end(), va.begin(), va.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  CHECK(std::is_sorted(tr.begin(), tr.end()));
  CHECK(d.train_indices() == tr);
  Dataset e = d;
  e.split_seed = 18;
  CHECK(e.train_indices() != tr);
}

TEST_CASE("EVCS container round trip") {
  const Dataset d = build_dataset(ChannelParams{}, 7, 4);
  std::stringstream ss;
  write_dataset(ss, d.samples);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "EVCS");
  CHECK(bytes.size() == 4 + 4 * 4 + 7 * 8 * 12 * 2 * 4);

  std::stringstream hs(bytes);
  const DatasetHeader h = read_dataset_header(hs);
  CHECK(h.version == 1);
  CHECK(h.n_samples == 7);
  CHECK(h.n_tx == 8);
  CHECK(h.n_subband == 12);

  std::stringstream rs(bytes);
  const auto back = read_dataset(rs);
  REQUIRE(back.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    for (int k = 0; k < 12; ++k) {
      for (int n = 0; n < 8; ++n) {
        const Complex want(to_f32(d.samples[i].w(n, k).real()), to_f32(d.samples[i].w(n, k).imag()));
        CHECK(back[i].w(n, k) == want);
      }
    }
  }
  // Re-encoding float32 values is lossless.
  std::stringstream again;
  write_dataset(again, back);
  CHECK(again.str() == bytes);

  std::stringstream bad("EVCX" + bytes.substr(4));
  CHECK_THROWS_AS(read_dataset(bad), IoError);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_dataset(truncated), IoError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/dir/x.evcs"), IoError);
}
