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

#include "evcsi/errors.hpp"
#include "evcsi/metrics.hpp"
#include "evcsi/quantizer.hpp"
#include "evcsi/training.hpp"
#include "support.hpp"

using namespace evcsi;
using evcsi::ndiff::DiffTensor;

namespace {

ModelConfig small_model(int bits = 16) {
  ModelConfig c;
  c.n_e = 16;
  c.n_b = 1;
  c.n_head = 2;
  c.bits_total = bits;
  return c;
}

TrainConfig small_train(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 16;
  t.warmup_epochs = 1;
  t.seed = 11;
  t.split_seed = 12;
  return t;
}

const Dataset& small_data() {
  static const Dataset d = build_dataset(channel_profile("desk"), 96, 21);
  return d;
}

DiffTensor tokens_param(Rng& rng, std::size_t n) {
  const auto samples = evcsi::testing::random_samples(rng, n, 4, 3);
  const auto t = csi_to_tokens(samples);
  return DiffTensor::parameter(t.shape(), std::vector<double>(t.values().begin(), t.values().end()));
}

}  // namespace

TEST_CASE("scoring loss is minus the batch sgcs") {
  Rng rng(1);
  const auto a = evcsi::testing::random_samples(rng, 5);
  const auto b = evcsi::testing::random_samples(rng, 5);
  const double loss = loss_scoring(csi_to_tokens(a), csi_to_tokens(b)).item();
  CHECK(std::abs(loss + sgcs(a, b)) < 1e-12);
  CHECK(loss_scoring(csi_to_tokens(a), csi_to_tokens(a)).item() == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("cosine loss") {
  Rng rng(2);
  const auto a = evcsi::testing::random_samples(rng, 4);
  const auto b = evcsi::testing::random_samples(rng, 4);
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 12; ++k) acc += std::sqrt(squared_cosine(a[i].w.col(k), b[i].w.col(k)));
  }
  const double want = 1.0 - acc / 48.0;
  CHECK(loss_cosine(csi_to_tokens(a), csi_to_tokens(b)).item() == doctest::Approx(want).epsilon(1e-12));
  // Phase rotation of the prediction leaves it unchanged.
  auto c = b;
  for (auto& s : c) s.w *= std::polar(1.0, 0.7);
  CHECK(loss_cosine(csi_to_tokens(a), csi_to_tokens(c)).item() == doctest::Approx(want).epsilon(1e-12));
  CHECK(loss_cosine(csi_to_tokens(a), csi_to_tokens(a)).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("mse loss") {
  Rng rng(3);
  const auto t = DiffTensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto p = DiffTensor::constant({2, 3}, {1, 2, 3, 4, 5, 9});
  CHECK(loss_mse(t, p).item() == doctest::Approx(1.5));
  CHECK(reconstruction_loss(LossKind::kMse, t, p).item() == doctest::Approx(1.5));
}

TEST_CASE("loss gradients") {
  Rng rng(4);
  const auto truth = csi_to_tokens(evcsi::testing::random_samples(rng, 3, 4, 3));
  for (LossKind kind : {LossKind::kCosine, LossKind::kScoring, LossKind::kMse}) {
    const ndiff::ScalarFn fn = [&](const std::vector<DiffTensor>& p) { return reconstruction_loss(kind, truth, p[0]); };
    CHECK(ndiff::grad_check(fn, {tokens_param(rng, 3)}).max_rel_error < 1e-5);
  }
}

TEST_CASE("degenerate columns are rejected") {
  Rng rng(5);
  auto samples = evcsi::testing::random_samples(rng, 2, 4, 3);
  const auto good = csi_to_tokens(samples);
  samples[1].w.col(2).setZero();
  const auto bad = csi_to_tokens(samples);
  CHECK_THROWS_AS(loss_cosine(good, bad), DegenerateInputError);
  CHECK_THROWS_AS(loss_scoring(bad, good), DegenerateInputError);
}

TEST_CASE("quantization compensation loss") {
  Rng rng(6);
  const auto vals = evcsi::testing::random_values(rng, 40, 0.0, 1.0);
  for (int bits : {1, 2, 3}) {
    const auto v = DiffTensor::parameter({4, 10}, vals);
    const auto q = quantize_ste(v, bits);
    const double mse = loss_quant_comp(v, q, QuantBase::kMse).item();
    CHECK(mse <= std::pow(2.0, -2 * (bits + 1)) + 1e-15);
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < 40; ++i) {
      err += (vals[i] - q[i]) * (vals[i] - q[i]);
      ref += vals[i] * vals[i];
    }
    CHECK(mse == doctest::Approx(err / 40.0).epsilon(1e-12));
    CHECK(loss_quant_comp(v, q, QuantBase::kNmse).item() == doctest::Approx(err / ref).epsilon(1e-12));
    // v' enters as a constant, so the gradient is 2 (v - v') / n.
    ndiff::backward(loss_quant_comp(v, q, QuantBase::kMse));
    for (std::size_t i = 0; i < 40; ++i) {
      CHECK(v.grad()[i] == doctest::Approx(2.0 * (vals[i] - q[i]) / 40.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  cfg.epochs = 100;
  cfg.warmup_epochs = 10;
  cfg.lr_max = 1e-3;
  cfg.lr_min = 1e-5;
  CHECK(lr_at_epoch(5, cfg) == doctest::Approx(5e-4));
  CHECK(lr_at_epoch(10, cfg) == doctest::Approx(1e-3));
  CHECK(lr_at_epoch(100, cfg) == doctest::Approx(1e-5));
  CHECK(lr_at_epoch(55, cfg) == doctest::Approx(1e-5 + 0.5 * (1e-3 - 1e-5)));
  cfg.decay_epochs = 40;
  CHECK(lr_at_epoch(50, cfg) == doctest::Approx(1e-5));
  CHECK(lr_at_epoch(80, cfg) == doctest::Approx(1e-5));
  double prev = 1.0;
  for (int t = 10; t <= 100; ++t) {
    CHECK(lr_at_epoch(t, cfg) <= prev);
    prev = lr_at_epoch(t, cfg);
  }
  CHECK_THROWS_AS(lr_at_epoch(0, cfg), ContractError);
  CHECK_THROWS_AS(lr_at_epoch(101, cfg), ContractError);
}

TEST_CASE("train config round trip") {
  TrainConfig cfg = small_train(7);
  cfg.loss_kind = LossKind::kScoring;
  cfg.quant_comp_weight = 0.25;
  cfg.quant_base = QuantBase::kNmse;
  cfg.augment = true;
  cfg.augment_cfg.noise_alpha = 0.02;
  cfg.stages = parse_stages("32:3,16:4:mse");
  KeyValueConfig kv;
  cfg.to_kv(kv);
  const TrainConfig back = TrainConfig::from_kv(kv);
  CHECK(back.epochs == 7);
  CHECK(back.loss_kind == LossKind::kScoring);
  CHECK(back.quant_base == QuantBase::kNmse);
  CHECK(back.quant_comp_weight == 0.25);
  CHECK(back.augment);
  CHECK(back.augment_cfg.noise_alpha == 0.02);
  CHECK(format_stages(back.stages) == format_stages(cfg.stages));
  CHECK(back.seed == cfg.seed);
  for (const auto& [k, v] : kv.entries()) CHECK(TrainConfig::keys().count(k) == 1);

  KeyValueConfig lr;
  lr.set("lr_max", 2e-3);
  CHECK(TrainConfig::from_kv(lr).lr_min == doctest::Approx(2e-5));
}

TEST_CASE("stage parsing") {
  const auto s = parse_stages("64:40, 32:20:scoring");
  REQUIRE(s.size() == 2);
  CHECK(s[0].bits_total == 64);
  CHECK(s[0].epochs == 40);
  CHECK(s[0].loss == LossKind::kCosine);
  CHECK(s[1].loss == LossKind::kScoring);
  CHECK(format_stages(s) == "64:40:cosine,32:20:scoring");
  CHECK_THROWS_AS(parse_stages("64"), ConfigError);
  CHECK_THROWS_AS(parse_stages("64:x"), ConfigError);
  CHECK_THROWS_AS(parse_stages("64:4:huber"), ConfigError);
  TrainConfig cfg;
  cfg.stages = parse_stages("32:1,64:1");
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("epoch log csv") {
  const std::vector<EpochLog> log{{1, 1e-3, 0.5, 0.25}, {2, 5e-4, 0.125, 0.75}};
  CHECK(epoch_log_csv(log) == "epoch,lr,train_loss,val_sgcs\n1,0.001,0.5,0.25\n2,0.00050000000000000001,0.125,0.75\n");
}

TEST_CASE("training is deterministic") {
  const TrainConfig cfg = small_train(2);
  const TrainResult a = train_run(small_data(), cfg, small_model());
  const TrainResult b = train_run(small_data(), cfg, small_model());
  CHECK(a.weights.same_values(b.weights));
  CHECK(epoch_log_csv(a.log) == epoch_log_csv(b.log));
  TrainConfig other = cfg;
  other.seed = 12;
  CHECK_FALSE(train_run(small_data(), other, small_model()).weights.same_values(a.weights));
}

TEST_CASE("short run reduces the loss") {
  const TrainResult r = train_run(small_data(), small_train(10), small_model());
  REQUIRE(r.log.size() == 10);
  CHECK(r.log.back().train_loss < r.log.front().train_loss);
  CHECK(r.log.back().val_sgcs > r.initial_val_sgcs);
  for (const auto& e : r.log) CHECK(std::isfinite(e.train_loss));
  CHECK(validation_sgcs(small_data(), small_train(10), r.weights, small_model()) == r.log.back().val_sgcs);
}

TEST_CASE("reference training log") {
  // Produced by this implementation; guards against silent numeric drift.
  const double want[][2] = {
      {0.67642754031589047, 0.17132882452778755},
      {0.63518268192050553, 0.19777996772181175},
      {0.62149501322973433, 0.19819580706974949},
  };
  TrainConfig cfg = small_train(3);
  cfg.augment = true;
  cfg.augment_cfg.noise_alpha = 0.01;
  cfg.quant_comp_weight = 0.1;
  const TrainResult r = train_run(small_data(), cfg, small_model());
  REQUIRE(r.log.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(r.log[i].train_loss == doctest::Approx(want[i][0]).epsilon(1e-6));
    CHECK(r.log[i].val_sgcs == doctest::Approx(want[i][1]).epsilon(1e-6));
  }
}

TEST_CASE("training rejects mismatched data") {
  ModelConfig c = small_model();
  c.n_tx = 4;
  CHECK_THROWS_AS(train_run(small_data(), small_train(1), c), DimensionMismatchError);
}

TEST_CASE("gradient reaches the encoder through the quantizer") {
  const ModelConfig c = small_model();
  ModelWeights w = init_model(c, 3);
  const auto tokens = csi_to_tokens(std::span<const CsiSample>(small_data().samples.data(), 8));
  const auto out = autoencoder_forward(w, c, tokens);
  ndiff::backward(loss_cosine(tokens, out.output));
  for (const char* name : {"enc.embed.w", "enc.head.w", "enc.block0.attn.wq"}) {
    double mag = 0.0;
    for (double g : w.at(name).grad()) mag += std::abs(g);
    INFO(name);
    CHECK(mag > 0.0);
  }
}

TEST_CASE("bottleneck surgery") {
  const ModelConfig c64 = small_model(64);
  const ModelWeights w = init_model(c64, 4);
  const ModelWeights r = resize_bottleneck(w, c64, 48, 9);
  const ModelConfig c48 = small_model(48);
  check_weights(r, c48);
  for (const auto& name : w.names()) {
    const bool head = name.rfind("enc.head.", 0) == 0 || name.rfind("dec.input.", 0) == 0;
    if (head) continue;
    const auto a = w.at(name).values();
    const auto b = r.at(name).values();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  CHECK(encode(small_data().samples[0], r, c48).size() == 48);
  CHECK_THROWS_AS(resize_bottleneck(w, c64, 80, 9), ConfigError);
}

TEST_CASE("staged training") {
  TrainConfig cfg = small_train(1);
  const auto stages = parse_stages("32:2,16:2");
  const StagedResult r = staged_train(small_data(), stages, cfg, small_model(32));
  REQUIRE(r.stages.size() == 2);
  CHECK(r.model_cfg.bits_total == 16);
  CHECK(r.stages[0].log.size() == 2);
  CHECK(r.stages[1].model_cfg.bits_total == 16);
  check_weights(r.weights, r.model_cfg);
  for (const auto& s : r.stages) {
    for (const auto& e : s.log) CHECK(std::isfinite(e.train_loss));
  }
  CHECK_THROWS_AS(staged_train(small_data(), parse_stages("16:1,32:1"), cfg, small_model(16)), ConfigError);
}
