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

#include <fstream>

#include "evcsi/ensemble.hpp"
#include "evcsi/errors.hpp"
#include "support.hpp"

using namespace evcsi;

namespace {

ModelConfig member_config(int bits) {
  ModelConfig c;
  c.n_e = 8;
  c.n_b = 1;
  c.n_head = 2;
  c.bits_total = bits;
  return c;
}

Ensemble make_ensemble(int bits_total, int n_members, std::uint64_t seed0 = 1) {
  Ensemble e;
  e.bits_total = bits_total;
  const int width = bits_total - index_bits_for(n_members);
  for (int v = 0; v < n_members; ++v) {
    const ModelConfig c = member_config(width);
    e.members.push_back({c, init_model(c, seed0 + v), "seed" + std::to_string(seed0 + v)});
  }
  return e;
}

}  // namespace

TEST_CASE("index bits") {
  CHECK(index_bits_for(1) == 0);
  CHECK(index_bits_for(2) == 1);
  CHECK(index_bits_for(3) == 2);
  CHECK(index_bits_for(4) == 2);
  CHECK(index_bits_for(5) == 3);
  const Ensemble e = make_ensemble(48, 4);
  CHECK(e.index_bits() == 2);
  CHECK(e.payload_bits() == 46);
  e.validate();
}

TEST_CASE("single member is the plain model") {
  Rng rng(1);
  const Ensemble e = make_ensemble(32, 1);
  CHECK(e.index_bits() == 0);
  const CsiSample s = evcsi::testing::random_sample(rng);
  const Bitstream b = ensemble_encode(s, e);
  CHECK(b == encode(s, e.members[0].weights, e.members[0].cfg));
  CHECK(ensemble_decode(b, e) == decode(b, e.members[0].weights, e.members[0].cfg));
}

TEST_CASE("selection is the argmax over members") {
  Rng rng(2);
  const Ensemble e = make_ensemble(48, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const CsiSample s = evcsi::testing::random_sample(rng);
    const EnsembleChoice c = ensemble_select(s, e);
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t v = 0; v < 4; ++v) {
      const auto& m = e.members[v];
      const double score = sample_sgcs(s, decode(encode(s, m.weights, m.cfg), m.weights, m.cfg));
      CHECK(score == c.member_sgcs[v]);
      if (score > best_score) {
        best_score = score;
        best = v;
      }
    }
    CHECK(c.member == best);
    CHECK(c.stream.size() == 48);
    // Big-endian index prefix.
    CHECK(c.stream.bit(0) == ((best >> 1) & 1));
    CHECK(c.stream.bit(1) == (best & 1));
    CHECK(ensemble_member_index(c.stream, e) == best);
    CHECK(sample_sgcs(s, ensemble_decode(c.stream, e)) == best_score);
  }
}

TEST_CASE("identical members pick index zero") {
  Rng rng(3);
  Ensemble e = make_ensemble(33, 2);
  e.members[1].weights = e.members[0].weights;
  for (int i = 0; i < 5; ++i) {
    const Bitstream b = ensemble_encode(evcsi::testing::random_sample(rng), e);
    CHECK_FALSE(b.bit(0));
  }
}

TEST_CASE("protocol errors") {
  Rng rng(4);
  const Ensemble e = make_ensemble(34, 3);
  Bitstream b = ensemble_encode(evcsi::testing::random_sample(rng), e);
  // Index 3 does not exist with three members.
  if (!b.bit(0)) b.flip(0);
  if (!b.bit(1)) b.flip(1);
  CHECK_THROWS_AS(ensemble_member_index(b, e), ProtocolError);
  CHECK_THROWS_AS(ensemble_decode(b, e), ProtocolError);
  CHECK_THROWS_AS(ensemble_decode(b.sub(0, 33), e), ProtocolError);
}

TEST_CASE("member width must match the payload") {
  Ensemble e = make_ensemble(33, 2);
  e.members[1].cfg = member_config(30);
  e.members[1].weights = init_model(e.members[1].cfg, 2);
  CHECK_THROWS_AS(e.validate(), ConfigError);
  Ensemble wide = make_ensemble(33, 2);
  wide.bits_total = 35;
  CHECK_THROWS_AS(wide.validate(), ConfigError);
}

TEST_CASE("evaluation agrees with the best member") {
  Rng rng(5);
  const Ensemble e = make_ensemble(33, 2);
  const auto samples = evcsi::testing::random_samples(rng, 16);
  const EnsembleEval ev = ensemble_evaluate(samples, e);
  REQUIRE(ev.ensemble_sgcs.size() == 16);
  double mean = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    const double best = std::max(ev.member_sgcs[0][i], ev.member_sgcs[1][i]);
    CHECK(ev.ensemble_sgcs[i] == best);
    CHECK(ev.streams[i] == ensemble_encode(samples[i], e));
    mean += ev.ensemble_sgcs[i];
  }
  CHECK(ev.report.sgcs == doctest::Approx(mean / 16).epsilon(1e-12));
  CHECK(ev.report.n_samples == 16);
}

TEST_CASE("manifest round trip") {
  evcsi::testing::TempDir dir("ensemble");
  const Ensemble e = make_ensemble(33, 2);
  EnsembleManifest m;
  m.bits_total = 33;
  for (int v = 0; v < 2; ++v) {
    const std::string name = "m" + std::to_string(v) + ".evcw";
    save_model(dir / name, e.members[v].weights, e.members[v].cfg);
    m.members.push_back(name);
  }
  save_ensemble_manifest(dir / "ens.cfg", m);
  const EnsembleManifest back = load_ensemble_manifest(dir / "ens.cfg");
  CHECK(back.bits_total == 33);
  REQUIRE(back.members.size() == 2);
  const Ensemble loaded = load_ensemble(dir / "ens.cfg");
  REQUIRE(loaded.members.size() == 2);
  for (int v = 0; v < 2; ++v) CHECK(loaded.members[v].weights.same_values(e.members[v].weights));

  std::ofstream(dir / "bad.cfg") << "bits_total = 33\ncolour = red\n";
  CHECK_THROWS_AS(load_ensemble_manifest(dir / "bad.cfg"), ConfigError);
  std::ofstream(dir / "nobits.cfg") << "member = m0.evcw\n";
  CHECK_THROWS_AS(load_ensemble_manifest(dir / "nobits.cfg"), ConfigError);
}
