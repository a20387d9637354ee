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

#include "evcsi/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <sstream>

#include "evcsi/errors.hpp"
#include "evcsi/metrics.hpp"
#include "evcsi/rng.hpp"

namespace evcsi {

using ndiff::DiffTensor;

namespace {

constexpr std::uint64_t kShuffleTag = 3;
constexpr std::uint64_t kAugmentTag = 4;
constexpr std::uint64_t kSurgeryTag = 5;

struct Parts {
  DiffTensor xr, xi;
};

Parts split_parts(const DiffTensor& t) {
  if (t.rank() != 3 || t.dim(2) % 2 != 0) {
    throw ContractError("loss: expected [B, n_subband, 2 n_tx], got " + ndiff::shape_str(t.shape()));
  }
  const std::size_t n = t.dim(2) / 2;
  return {ndiff::slice(t, 2, 0, n), ndiff::slice(t, 2, n, n)};
}

void check_pair(const DiffTensor& a, const DiffTensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractError("loss: shape mismatch " + ndiff::shape_str(a.shape()) + " vs " +
                        ndiff::shape_str(b.shape()));
  }
}

void check_columns(const DiffTensor& t) {
  const std::size_t width = t.dim(2);
  const auto v = t.values();
  for (std::size_t c = 0; c < v.size() / width; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < width; ++i) s += v[c * width + i] * v[c * width + i];
    if (s == 0.0) throw DegenerateInputError("loss: zero-norm column " + std::to_string(c));
  }
}

// |w^H w'|^2 and |w|^2 |w'|^2 per column, shapes [B, n_subband, 1].
std::pair<DiffTensor, DiffTensor> overlap_terms(const DiffTensor& truth, const DiffTensor& pred) {
  check_pair(truth, pred);
  check_columns(truth);
  check_columns(pred);
  const Parts x = split_parts(truth);
  const Parts y = split_parts(pred);
  const DiffTensor re = ndiff::sum_last(ndiff::add(ndiff::mul(x.xr, y.xr), ndiff::mul(x.xi, y.xi)));
  const DiffTensor im = ndiff::sum_last(ndiff::sub(ndiff::mul(x.xr, y.xi), ndiff::mul(x.xi, y.xr)));
  const DiffTensor num = ndiff::add(ndiff::square(re), ndiff::square(im));
  const DiffTensor den = ndiff::mul(ndiff::sum_last(ndiff::square(truth)), ndiff::sum_last(ndiff::square(pred)));
  return {num, den};
}

std::uint64_t fold(std::uint64_t seed, std::uint64_t stage) {
  return stage == 0 ? seed : substream_seed(seed, stage, kSurgeryTag);
}

}  // namespace

LossKind parse_loss_kind(const std::string& s) {
  if (s == "cosine") return LossKind::kCosine;
  if (s == "scoring") return LossKind::kScoring;
  if (s == "mse") return LossKind::kMse;
  throw ConfigError("unknown loss kind '" + s + "' (cosine, scoring, mse)");
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::kCosine: return "cosine";
    case LossKind::kScoring: return "scoring";
    case LossKind::kMse: return "mse";
  }
  return "?";
}

QuantBase parse_quant_base(const std::string& s) {
  if (s == "mse") return QuantBase::kMse;
  if (s == "nmse") return QuantBase::kNmse;
  throw ConfigError("unknown quant_base '" + s + "' (mse, nmse)");
}

std::string to_string(QuantBase b) { return b == QuantBase::kMse ? "mse" : "nmse"; }

std::vector<StageConfig> parse_stages(const std::string& s) {
  std::vector<StageConfig> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::vector<std::string> f;
    std::stringstream is(item);
    std::string tok;
    while (std::getline(is, tok, ':')) f.push_back(tok);
    if (f.size() < 2 || f.size() > 3) throw ConfigError("stages: malformed entry '" + item + "'");
    StageConfig st;
    try {
      st.bits_total = std::stoi(f[0]);
      st.epochs = std::stoi(f[1]);
    } catch (const std::exception&) {
      throw ConfigError("stages: malformed entry '" + item + "'");
    }
    if (f.size() == 3) st.loss = parse_loss_kind(f[2]);
    if (st.bits_total <= 0 || st.epochs <= 0) throw ConfigError("stages: M and epochs must be positive");
    out.push_back(st);
  }
  return out;
}

std::string format_stages(const std::vector<StageConfig>& stages) {
  std::string s;
  for (const auto& st : stages) {
    if (!s.empty()) s += ',';
    s += std::to_string(st.bits_total) + ':' + std::to_string(st.epochs) + ':' + to_string(st.loss);
  }
  return s;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs > epochs) {
    throw ConfigError("TrainConfig: warmup_epochs must lie in [0, epochs]");
  }
  if (effective_decay() < 0) throw ConfigError("TrainConfig: decay_epochs must be >= 0");
  if (!(lr_max > 0.0) || !(lr_min > 0.0) || lr_min > lr_max) {
    throw ConfigError("TrainConfig: need 0 < lr_min <= lr_max");
  }
  if (!(quant_comp_weight >= 0.0)) throw ConfigError("TrainConfig: quant_comp_weight must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("TrainConfig: train_fraction must lie in (0, 1)");
  }
  augment_cfg.validate();
  for (std::size_t i = 1; i < stages.size(); ++i) {
    if (stages[i].bits_total > stages[i - 1].bits_total) {
      throw ConfigError("TrainConfig: stages must not increase M (" + std::to_string(stages[i - 1].bits_total) +
                        " -> " + std::to_string(stages[i].bits_total) + ")");
    }
  }
}

const std::set<std::string>& TrainConfig::keys() {
  static const std::set<std::string> k = [] {
    std::set<std::string> s{"epochs",         "batch_size",   "lr_max",     "lr_min",         "warmup_epochs",
                            "decay_epochs",   "loss_kind",    "quant_comp_weight", "quant_base", "seed",
                            "split_seed",     "train_fraction", "augment",  "noise_target",   "stages"};
    s.insert(AugmentConfig::keys().begin(), AugmentConfig::keys().end());
    return s;
  }();
  return k;
}

void TrainConfig::to_kv(KeyValueConfig& kv) const {
  kv.set("epochs", epochs);
  kv.set("batch_size", batch_size);
  kv.set("lr_max", lr_max);
  kv.set("lr_min", lr_min);
  kv.set("warmup_epochs", warmup_epochs);
  kv.set("decay_epochs", decay_epochs);
  kv.set("loss_kind", to_string(loss_kind));
  kv.set("quant_comp_weight", quant_comp_weight);
  kv.set("quant_base", to_string(quant_base));
  kv.set("seed", seed);
  kv.set("split_seed", split_seed);
  kv.set("train_fraction", train_fraction);
  kv.set("augment", std::string(augment ? "true" : "false"));
  kv.set("noise_target", std::string(noisy_target ? "augmented" : "clean"));
  if (!stages.empty()) kv.set("stages", format_stages(stages));
  augment_cfg.to_kv(kv);
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig c;
  if (kv.has("epochs")) c.epochs = kv.get_int("epochs");
  if (kv.has("batch_size")) c.batch_size = kv.get_int("batch_size");
  if (kv.has("lr_max")) {
    c.lr_max = kv.get_double("lr_max");
    c.lr_min = c.lr_max / 100.0;
  }
  if (kv.has("lr_min")) c.lr_min = kv.get_double("lr_min");
  if (kv.has("warmup_epochs")) c.warmup_epochs = kv.get_int("warmup_epochs");
  if (kv.has("decay_epochs")) c.decay_epochs = kv.get_int("decay_epochs");
  if (kv.has("loss_kind")) c.loss_kind = parse_loss_kind(kv.get("loss_kind"));
  if (kv.has("quant_comp_weight")) c.quant_comp_weight = kv.get_double("quant_comp_weight");
  if (kv.has("quant_base")) c.quant_base = parse_quant_base(kv.get("quant_base"));
  if (kv.has("seed")) c.seed = kv.get_u64("seed");
  if (kv.has("split_seed")) c.split_seed = kv.get_u64("split_seed");
  if (kv.has("train_fraction")) c.train_fraction = kv.get_double("train_fraction");
  if (kv.has("augment")) c.augment = kv.get_bool("augment");
  if (kv.has("noise_target")) {
    const std::string& t = kv.get("noise_target");
    if (t != "clean" && t != "augmented") throw ConfigError("noise_target must be clean or augmented");
    c.noisy_target = t == "augmented";
  }
  if (kv.has("stages")) c.stages = parse_stages(kv.get("stages"));
  c.augment_cfg.update_from(kv);
  c.validate();
  return c;
}

DiffTensor loss_cosine(const DiffTensor& truth, const DiffTensor& pred) {
  auto [num, den] = overlap_terms(truth, pred);
  const DiffTensor cos = ndiff::sqrt(ndiff::div(num, den));
  return ndiff::add_scalar(ndiff::scale(ndiff::mean(cos), -1.0), 1.0);
}

DiffTensor loss_scoring(const DiffTensor& truth, const DiffTensor& pred) {
  auto [num, den] = overlap_terms(truth, pred);
  return ndiff::scale(ndiff::mean(ndiff::div(num, den)), -1.0);
}

DiffTensor loss_mse(const DiffTensor& truth, const DiffTensor& pred) {
  check_pair(truth, pred);
  return ndiff::mean(ndiff::square(ndiff::sub(pred, truth)));
}

DiffTensor reconstruction_loss(LossKind kind, const DiffTensor& truth, const DiffTensor& pred) {
  switch (kind) {
    case LossKind::kCosine: return loss_cosine(truth, pred);
    case LossKind::kScoring: return loss_scoring(truth, pred);
    case LossKind::kMse: return loss_mse(truth, pred);
  }
  throw ContractError("reconstruction_loss: bad kind");
}

DiffTensor loss_quant_comp(const DiffTensor& v_pre, const DiffTensor& v_post, QuantBase base) {
  if (v_pre.size() != v_post.size()) {
    throw ContractError("loss_quant_comp: length mismatch " + std::to_string(v_pre.size()) + " vs " +
                        std::to_string(v_post.size()));
  }
  const DiffTensor target = ndiff::reshape(v_post.detach(), v_pre.shape());
  const DiffTensor err = ndiff::square(ndiff::sub(v_pre, target));
  if (base == QuantBase::kMse) return ndiff::mean(err);
  const DiffTensor ref = ndiff::sum(ndiff::square(v_pre));
  if (ref.item() == 0.0) throw DegenerateInputError("loss_quant_comp: zero reference energy");
  return ndiff::div(ndiff::sum(err), ref);
}

double lr_at_epoch(int t, const TrainConfig& cfg) {
  if (t < 1 || t > cfg.epochs) {
    throw ContractError("lr_at_epoch: epoch " + std::to_string(t) + " outside [1, " + std::to_string(cfg.epochs) + "]");
  }
  const int tw = cfg.warmup_epochs;
  const int td = cfg.effective_decay();
  if (t <= tw) return static_cast<double>(t) / tw * cfg.lr_max;
  if (t >= tw + td) return cfg.lr_min;
  return cfg.lr_min +
         0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(static_cast<double>(t - tw) * std::numbers::pi / td));
}

std::string epoch_log_csv(const std::vector<EpochLog>& log) {
  std::string s = "epoch,lr,train_loss,val_sgcs\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", e.epoch, e.lr, e.train_loss, e.val_sgcs);
    s += buf;
  }
  return s;
}

void save_epoch_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  write_file_atomic(path, epoch_log_csv(log));
}

Dataset with_split(const Dataset& data, const TrainConfig& cfg) {
  Dataset d;
  d.split_seed = cfg.split_seed;
  d.train_fraction = cfg.train_fraction;
  d.samples = data.samples;
  return d;
}

namespace {

std::vector<CsiSample> pick(const Dataset& d, const std::vector<std::size_t>& idx) {
  std::vector<CsiSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(d.samples[i]);
  return out;
}

double val_sgcs_of(const std::vector<CsiSample>& val, const ModelWeights& w, const ModelConfig& m) {
  const auto rec = reconstruct(val, w, m);
  return sgcs(val, rec);
}

}  // namespace

double validation_sgcs(const Dataset& data, const TrainConfig& cfg, const ModelWeights& w,
                       const ModelConfig& model_cfg) {
  const Dataset d = with_split(data, cfg);
  return val_sgcs_of(pick(d, d.validation_indices()), w, model_cfg);
}

TrainResult train_run(const Dataset& data, const TrainConfig& cfg, const ModelConfig& model_cfg,
                      const ModelWeights* init, const EpochCallback& on_epoch) {
  cfg.validate();
  model_cfg.validate();
  if (data.samples.empty()) throw ContractError("train_run: empty dataset");
  const Dataset d = with_split(data, cfg);
  const auto& first = d.samples.front();
  if (first.n_tx() != model_cfg.n_tx || first.n_subband() != model_cfg.n_subband) {
    throw DimensionMismatchError("train_run: data is " + std::to_string(first.n_tx()) + "x" +
                                 std::to_string(first.n_subband()) + ", model expects " +
                                 std::to_string(model_cfg.n_tx) + "x" + std::to_string(model_cfg.n_subband));
  }
  const std::vector<CsiSample> train = pick(d, d.train_indices());
  const std::vector<CsiSample> val = pick(d, d.validation_indices());
  if (train.empty() || val.empty()) throw ContractError("train_run: split leaves an empty part");

  TrainResult res;
  res.model_cfg = model_cfg;
  if (init) {
    check_weights(*init, model_cfg);
    res.weights = *init;
  } else {
    res.weights = init_model(model_cfg, cfg.seed);
  }
  res.initial_val_sgcs = val_sgcs_of(val, res.weights, model_cfg);

  auto& params = res.weights.tensors();
  ndiff::AdamState adam = ndiff::AdamState::for_params(params);
  std::vector<std::size_t> order(train.size());
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, cfg);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = make_rng(cfg.seed, static_cast<std::uint64_t>(epoch), kShuffleTag);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    Rng aug_rng = make_rng(cfg.seed, static_cast<std::uint64_t>(epoch), kAugmentTag);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t n = std::min(bs, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, n);
      DiffTensor inputs, targets;
      if (cfg.augment) {
        std::vector<CsiSample> in, tg;
        in.reserve(n);
        tg.reserve(n);
        for (std::size_t i : idx) {
          auto p = augment_sample(train[i], cfg.augment_cfg, cfg.noisy_target, aug_rng);
          in.push_back(std::move(p.input));
          tg.push_back(std::move(p.target));
        }
        inputs = csi_to_tokens(in);
        targets = csi_to_tokens(tg);
      } else {
        inputs = csi_to_tokens(train, idx);
        targets = inputs;
      }
      const AutoencoderOutput out = autoencoder_forward(res.weights, model_cfg, inputs);
      DiffTensor loss = reconstruction_loss(cfg.loss_kind, targets, out.output);
      if (cfg.quant_comp_weight > 0.0) {
        loss = ndiff::add(loss, ndiff::scale(loss_quant_comp(out.pre_quant, out.post_quant, cfg.quant_base),
                                             cfg.quant_comp_weight));
      }
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw TrainingError("train_run: non-finite loss at epoch " + std::to_string(epoch), epoch);
      }
      res.weights.zero_grad();
      ndiff::backward(loss);
      ndiff::adam_step(params, adam, lr);
      loss_sum += value * static_cast<double>(n);
    }

    EpochLog e;
    e.epoch = epoch;
    e.lr = lr;
    e.train_loss = loss_sum / static_cast<double>(train.size());
    e.val_sgcs = val_sgcs_of(val, res.weights, model_cfg);
    res.log.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  return res;
}

ModelWeights resize_bottleneck(const ModelWeights& w, const ModelConfig& old_cfg, int new_bits,
                               std::uint64_t seed) {
  check_weights(w, old_cfg);
  if (new_bits > old_cfg.bits_total) {
    throw ConfigError("resize_bottleneck: M must not increase (" + std::to_string(old_cfg.bits_total) + " -> " +
                      std::to_string(new_bits) + ")");
  }
  ModelConfig cfg = old_cfg;
  cfg.bits_total = new_bits;
  cfg.validate();
  ModelWeights out = w;
  for (const auto& spec : parameter_specs(cfg)) {
    if (spec.name.rfind("enc.head.", 0) == 0 || spec.name.rfind("dec.input.", 0) == 0) {
      out.replace(spec.name, init_parameter(spec, seed));
    }
  }
  check_weights(out, cfg);
  return out;
}

StagedResult staged_train(const Dataset& data, const std::vector<StageConfig>& stages,
                          const TrainConfig& cfg, const ModelConfig& model_cfg,
                          const EpochCallback& on_epoch) {
  if (stages.empty()) throw ConfigError("staged_train: no stages");
  TrainConfig check = cfg;
  check.stages = stages;
  check.validate();

  StagedResult res;
  res.model_cfg = model_cfg;
  res.model_cfg.bits_total = stages.front().bits_total;
  res.model_cfg.validate();
  res.weights = init_model(res.model_cfg, cfg.seed);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const StageConfig& st = stages[s];
    if (s > 0) {
      res.weights = resize_bottleneck(res.weights, res.model_cfg, st.bits_total, fold(cfg.seed, s));
      res.model_cfg.bits_total = st.bits_total;
    }
    TrainConfig sc = cfg;
    sc.stages.clear();
    sc.epochs = st.epochs;
    sc.loss_kind = st.loss;
    sc.warmup_epochs = std::min(cfg.warmup_epochs, st.epochs);
    sc.decay_epochs = st.epochs - sc.warmup_epochs;
    sc.seed = fold(cfg.seed, s);
    TrainResult r = train_run(data, sc, res.model_cfg, &res.weights, on_epoch);
    res.weights = r.weights;
    res.stages.push_back(std::move(r));
  }
  return res;
}

}  // namespace evcsi
