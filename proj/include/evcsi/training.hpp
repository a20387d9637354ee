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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "evcsi/augment.hpp"
#include "evcsi/channelgen.hpp"
#include "evcsi/config.hpp"
#include "evcsi/model.hpp"
#include "evcsi/ndiff.hpp"

namespace evcsi {

enum class LossKind { kCosine, kScoring, kMse };
enum class QuantBase { kMse, kNmse };

LossKind parse_loss_kind(const std::string& s);
std::string to_string(LossKind k);
QuantBase parse_quant_base(const std::string& s);
std::string to_string(QuantBase b);

struct StageConfig {
  int bits_total = 0;
  int epochs = 0;
  LossKind loss = LossKind::kCosine;
};

// "M:epochs[:loss]" entries separated by commas, e.g. "64:40,32:20:scoring".
std::vector<StageConfig> parse_stages(const std::string& s);
std::string format_stages(const std::vector<StageConfig>& stages);

struct TrainConfig {
  int epochs = 300;
  int batch_size = 64;
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  int warmup_epochs = 5;
  int decay_epochs = -1;  // -1: epochs - warmup_epochs
  LossKind loss_kind = LossKind::kCosine;
  double quant_comp_weight = 0.0;
  QuantBase quant_base = QuantBase::kMse;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.8;
  bool augment = false;
  bool noisy_target = false;
  AugmentConfig augment_cfg;
  std::vector<StageConfig> stages;

  void validate() const;
  int effective_decay() const { return decay_epochs >= 0 ? decay_epochs : epochs - warmup_epochs; }

  void to_kv(KeyValueConfig& kv) const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
  // Training and augmentation keys; all optional.
  static const std::set<std::string>& keys();
};

// --- losses ---------------------------------------------------------------
// Token tensors are [B, n_subband, 2 n_tx] with [Re; Im] along the last axis.
// A zero-norm column in either argument throws DegenerateInputError.

// 1 - mean |w^H w'| / (|w| |w'|).
ndiff::DiffTensor loss_cosine(const ndiff::DiffTensor& truth, const ndiff::DiffTensor& pred);
// -mean |w^H w'|^2 / (|w|^2 |w'|^2), i.e. minus the batch SGCS.
ndiff::DiffTensor loss_scoring(const ndiff::DiffTensor& truth, const ndiff::DiffTensor& pred);
ndiff::DiffTensor loss_mse(const ndiff::DiffTensor& truth, const ndiff::DiffTensor& pred);
ndiff::DiffTensor reconstruction_loss(LossKind kind, const ndiff::DiffTensor& truth,
                                      const ndiff::DiffTensor& pred);

// Distance between the quantizer input and its dequantized output. v_post
// enters as a constant: through the straight-through estimator its
// dependence on v_pre would cancel the gradient exactly.
ndiff::DiffTensor loss_quant_comp(const ndiff::DiffTensor& v_pre, const ndiff::DiffTensor& v_post,
                                  QuantBase base);

// --- schedule -------------------------------------------------------------

// Linear warm-up to lr_max at t = T_w, cosine decay to lr_min at
// t = T_w + T_d, constant lr_min afterwards. 1 <= t <= epochs.
double lr_at_epoch(int t, const TrainConfig& cfg);

// --- loop -----------------------------------------------------------------

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_sgcs = 0.0;
};

std::string epoch_log_csv(const std::vector<EpochLog>& log);
void save_epoch_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

struct TrainResult {
  ModelWeights weights;
  ModelConfig model_cfg;
  double initial_val_sgcs = 0.0;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Uses the dataset split given by (cfg.split_seed, cfg.train_fraction).
// Starts from `init` when given, otherwise from init_model(model_cfg, seed).
TrainResult train_run(const Dataset& data, const TrainConfig& cfg, const ModelConfig& model_cfg,
                      const ModelWeights* init = nullptr, const EpochCallback& on_epoch = {});

// Validation SGCS of decode(encode(.)) over the split's validation part.
double validation_sgcs(const Dataset& data, const TrainConfig& cfg, const ModelWeights& w,
                       const ModelConfig& model_cfg);
Dataset with_split(const Dataset& data, const TrainConfig& cfg);

// Replaces enc.head.* and dec.input.* with fresh tensors for the new bit
// budget; every other tensor is carried over unchanged.
ModelWeights resize_bottleneck(const ModelWeights& w, const ModelConfig& old_cfg, int new_bits,
                               std::uint64_t seed);

struct StagedResult {
  ModelWeights weights;
  ModelConfig model_cfg;
  std::vector<TrainResult> stages;
};

// Each stage runs its own schedule over stage.epochs. The first stage
// starts from init_model; stages must not increase M.
StagedResult staged_train(const Dataset& data, const std::vector<StageConfig>& stages,
                          const TrainConfig& cfg, const ModelConfig& model_cfg,
                          const EpochCallback& on_epoch = {});

}  // namespace evcsi
