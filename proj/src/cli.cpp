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

#include "evcsi/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "evcsi/channelgen.hpp"
#include "evcsi/codebook.hpp"
#include "evcsi/ensemble.hpp"
#include "evcsi/errors.hpp"
#include "evcsi/metrics.hpp"
#include "evcsi/training.hpp"

namespace evcsi {

namespace fs = std::filesystem;

fs::path manifest_path(const fs::path& artifact) {
  fs::path p = artifact;
  p += ".manifest";
  return p;
}

KeyValueConfig RunManifest::to_kv() const {
  KeyValueConfig kv;
  kv.set("command", command);
  kv.set("argv", argv);
  kv.set("config", config_path.empty() ? std::string("none") : config_path);
  kv.set("version", std::string(kToolVersion));
  for (const auto& [k, v] : seeds) kv.set("seed." + k, v);
  for (const auto& [k, v] : artifacts) kv.set("artifact." + k, v);
  for (const auto& [k, v] : resolved.entries()) kv.set("config." + k, v);
  return kv;
}

void RunManifest::save(const fs::path& artifact) const { to_kv().save(manifest_path(artifact)); }

ModelConfig model_from_run_config(const KeyValueConfig& kv) {
  KeyValueConfig merged;
  ModelConfig{}.to_kv(merged);
  for (const auto& key : ModelConfig::keys()) {
    if (kv.has(key)) merged.set(key, kv.get(key));
  }
  return ModelConfig::from_kv(merged);
}

void check_run_config(const KeyValueConfig& kv) {
  std::set<std::string> allowed = ModelConfig::keys();
  allowed.insert(TrainConfig::keys().begin(), TrainConfig::keys().end());
  kv.require_keys(allowed, {"seed"});
}

ModelConfig published_model_config(int bits_total) {
  ModelConfig c;
  c.n_e = 512;
  c.n_b = 10;
  c.n_head = 16;
  c.k_h = 2;
  c.n_tx = 32;
  c.n_subband = 12;
  c.bits_per_symbol = 2;
  c.bits_total = bits_total;
  return c;
}

std::vector<ComplexityRow> published_complexity_rows() {
  struct Ref {
    int m;
    double ef, df, ep, dp;
  };
  static constexpr Ref kTable[] = {
      {32, 4.2099e7, 4.2099e7, 2.1107e7, 2.1108e7},
      {48, 4.2111e7, 4.2111e7, 2.1113e7, 2.1114e7},
      {120, 4.2166e7, 4.2166e7, 2.1141e7, 2.1142e7},
  };
  std::vector<ComplexityRow> rows;
  for (const auto& r : kTable) {
    ComplexityRow row;
    row.bits_total = r.m;
    row.count = count_complexity(published_model_config(r.m));
    row.ref_encoder_params = r.ep;
    row.ref_decoder_params = r.dp;
    row.ref_encoder_flops = r.ef;
    row.ref_decoder_flops = r.df;
    rows.push_back(row);
  }
  return rows;
}

double relative_deviation(double value, double reference) { return (value - reference) / reference; }

double parameter_spread(const std::vector<ComplexityRow>& rows) {
  double lo = INFINITY, hi = 0.0;
  for (const auto& r : rows) {
    for (double v : {static_cast<double>(r.count.encoder_params), static_cast<double>(r.count.decoder_params)}) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return (hi - lo) / lo;
}

namespace {

std::string join_argv(int argc, const char* const* argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void check_dims(const std::vector<CsiSample>& data, const ModelConfig& cfg, const std::string& what) {
  if (data.empty()) throw ContractError(what + ": dataset is empty");
  const auto& s = data.front();
  if (s.n_tx() != cfg.n_tx || s.n_subband() != cfg.n_subband) {
    throw DimensionMismatchError(what + ": data has n_tx=" + std::to_string(s.n_tx()) + ", n_subband=" +
                                 std::to_string(s.n_subband()) + " but the model expects n_tx=" +
                                 std::to_string(cfg.n_tx) + ", n_subband=" + std::to_string(cfg.n_subband));
  }
}

// Samples of the requested split: "all", "train" or "val".
std::vector<CsiSample> select_split(std::vector<CsiSample> samples, const std::string& split,
                                    std::uint64_t split_seed, double train_fraction) {
  if (split == "all") return samples;
  Dataset d;
  d.samples = std::move(samples);
  d.split_seed = split_seed;
  d.train_fraction = train_fraction;
  const auto idx = split == "train" ? d.train_indices() : d.validation_indices();
  std::vector<CsiSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(d.samples[i]);
  return out;
}

void write_report(const std::string& path, const std::string& text) {
  if (!path.empty()) write_file_atomic(path, text);
}

struct GenArgs {
  std::string out, profile = "desk";
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  ChannelParams overrides;
  int n_tx = -1, n_rx = -1, n_subband = -1, n_cluster = -1, n_subpath = -1;
  double delay_spread = -1, angle_spread = -1;
};

int cmd_gen(const GenArgs& a, const RunManifest& base, std::ostream& out) {
  ChannelParams p = channel_profile(a.profile);
  if (a.n_tx > 0) p.n_tx = a.n_tx;
  if (a.n_rx > 0) p.n_rx = a.n_rx;
  if (a.n_subband > 0) p.n_subband = a.n_subband;
  if (a.n_cluster > 0) p.n_cluster = a.n_cluster;
  if (a.n_subpath > 0) p.n_subpath = a.n_subpath;
  if (a.delay_spread >= 0) p.delay_spread = a.delay_spread;
  if (a.angle_spread >= 0) p.angle_spread_deg = a.angle_spread;
  p.validate();
  const Dataset d = build_dataset(p, a.samples, a.seed);
  save_dataset(a.out, d.samples);

  RunManifest m = base;
  m.seeds.emplace_back("master", std::to_string(a.seed));
  m.artifacts.emplace_back("dataset", a.out);
  m.resolved.set("profile", a.profile);
  m.resolved.set("samples", static_cast<std::uint64_t>(a.samples));
  m.resolved.set("n_tx", p.n_tx);
  m.resolved.set("n_rx", p.n_rx);
  m.resolved.set("n_subband", p.n_subband);
  m.resolved.set("n_cluster", p.n_cluster);
  m.resolved.set("n_subpath", p.n_subpath);
  m.resolved.set("delay_spread", p.delay_spread);
  m.resolved.set("angle_spread_deg", p.angle_spread_deg);
  m.resolved.set("carrier_hz", p.carrier_hz);
  m.resolved.set("subcarrier_hz", p.subcarrier_hz);
  m.resolved.set("n_rb", p.n_rb);
  m.save(a.out);
  out << "wrote " << a.samples << " samples (" << p.n_tx << "x" << p.n_subband << ") to " << a.out << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string data, config, out, log;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, const RunManifest& base, std::ostream& out) {
  const KeyValueConfig kv = KeyValueConfig::load(a.config);
  check_run_config(kv);
  ModelConfig mc = model_from_run_config(kv);
  const TrainConfig tc = TrainConfig::from_kv(kv);
  if (!tc.stages.empty()) mc.bits_total = tc.stages.front().bits_total;

  Dataset data;
  data.samples = load_dataset(a.data);
  check_dims(data.samples, mc, "train");

  const EpochCallback progress = [&](const EpochLog& e) {
    if (!a.quiet) {
      out << "epoch " << e.epoch << " lr " << fmt("%.3e", e.lr) << " loss " << fmt("%.6f", e.train_loss)
          << " val_sgcs " << fmt("%.6f", e.val_sgcs) << '\n'
          << std::flush;
    }
  };
  ModelWeights weights;
  std::vector<EpochLog> log;
  double initial = 0.0;
  if (tc.stages.empty()) {
    TrainResult r = train_run(data, tc, mc, nullptr, progress);
    weights = std::move(r.weights);
    log = std::move(r.log);
    initial = r.initial_val_sgcs;
  } else {
    StagedResult r = staged_train(data, tc.stages, tc, mc, progress);
    weights = std::move(r.weights);
    mc = r.model_cfg;
    initial = r.stages.front().initial_val_sgcs;
    int offset = 0;
    for (const auto& st : r.stages) {
      for (EpochLog e : st.log) {
        e.epoch += offset;
        log.push_back(e);
      }
      offset += static_cast<int>(st.log.size());
    }
  }

  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  KeyValueConfig extra;
  extra.set("split_seed", tc.split_seed);
  extra.set("train_fraction", tc.train_fraction);
  extra.set("seed", tc.seed);
  extra.set("initial_val_sgcs", initial);
  extra.set("final_val_sgcs", log.back().val_sgcs);
  save_model(a.out, weights, mc, extra);
  save_epoch_log(log_path, log);

  RunManifest m = base;
  m.config_path = a.config;
  m.seeds.emplace_back("train", std::to_string(tc.seed));
  m.seeds.emplace_back("split", std::to_string(tc.split_seed));
  m.artifacts.emplace_back("dataset", a.data);
  m.artifacts.emplace_back("weights", a.out);
  m.artifacts.emplace_back("sidecar", sidecar_path(a.out).string());
  m.artifacts.emplace_back("log", log_path);
  mc.to_kv(m.resolved);
  tc.to_kv(m.resolved);
  m.save(a.out);
  m.save(log_path);
  out << "initial val_sgcs " << fmt("%.6f", initial) << ", final val_sgcs " << fmt("%.6f", log.back().val_sgcs)
      << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string data, weights, split = "val", out;
};

int cmd_eval(const EvalArgs& a, const RunManifest& base, std::ostream& out) {
  const LoadedModel lm = load_model(a.weights);
  auto samples = load_dataset(a.data);
  check_dims(samples, lm.cfg, "eval");
  const std::uint64_t split_seed = lm.sidecar.has("split_seed") ? lm.sidecar.get_u64("split_seed") : 0;
  const double fraction = lm.sidecar.has("train_fraction") ? lm.sidecar.get_double("train_fraction") : 0.8;
  const auto set = select_split(std::move(samples), a.split, split_seed, fraction);
  const auto rec = reconstruct(set, lm.weights, lm.cfg);
  const EvalReport r = evaluate(set, rec);
  const std::string text = "method," + EvalReport::csv_header() + "\nevcsinet-t(M=" +
                           std::to_string(lm.cfg.bits_total) + ")," + r.csv_row() + "\n";
  out << text;
  if (!a.out.empty()) {
    write_report(a.out, text);
    RunManifest m = base;
    m.seeds.emplace_back("split", std::to_string(split_seed));
    m.artifacts.emplace_back("dataset", a.data);
    m.artifacts.emplace_back("weights", a.weights);
    m.artifacts.emplace_back("report", a.out);
    m.resolved.set("split", a.split);
    m.save(a.out);
  }
  return kExitOk;
}

struct BaselineArgs {
  std::string data, split = "all", out;
  int oversample = 4;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.8;
};

int cmd_baseline(const BaselineArgs& a, const RunManifest& base, std::ostream& out) {
  auto samples = load_dataset(a.data);
  if (samples.empty()) throw ContractError("baseline: dataset is empty");
  const auto set = select_split(std::move(samples), a.split, a.split_seed, a.train_fraction);
  const Codebook cb = build_dft_codebook({set.front().n_tx(), a.oversample});
  std::vector<CsiSample> rec;
  rec.reserve(set.size());
  for (const auto& s : set) rec.push_back(codebook_decode(codebook_encode(s, cb), cb));
  const EvalReport r = evaluate(set, rec);
  const int bits = codebook_feedback_bits(cb, set.front().n_subband());
  const std::string text = "method,feedback_bits," + EvalReport::csv_header() + "\ndft-grid(O=" +
                           std::to_string(a.oversample) + ")," + std::to_string(bits) + "," + r.csv_row() + "\n";
  out << text;
  if (!a.out.empty()) {
    write_report(a.out, text);
    RunManifest m = base;
    m.seeds.emplace_back("split", std::to_string(a.split_seed));
    m.artifacts.emplace_back("dataset", a.data);
    m.artifacts.emplace_back("report", a.out);
    m.resolved.set("oversample", a.oversample);
    m.resolved.set("split", a.split);
    m.resolved.set("train_fraction", a.train_fraction);
    m.save(a.out);
  }
  return kExitOk;
}

struct EnsembleArgs {
  std::string manifest, data, split = "all", out;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.8;
};

int cmd_ensemble(const EnsembleArgs& a, const RunManifest& base, std::ostream& out) {
  const Ensemble ens = load_ensemble(a.manifest);
  auto samples = load_dataset(a.data);
  check_dims(samples, ens.members.front().cfg, "ensemble");
  const auto set = select_split(std::move(samples), a.split, a.split_seed, a.train_fraction);
  const EnsembleEval ev = ensemble_evaluate(set, ens);
  std::ostringstream text;
  text << "method,feedback_bits," << EvalReport::csv_header() << '\n';
  for (std::size_t j = 0; j < ens.members.size(); ++j) {
    const auto& mem = ens.members[j];
    const auto rec = reconstruct(set, mem.weights, mem.cfg);
    text << "member" << j << "," << mem.cfg.bits_total << "," << evaluate(set, rec).csv_row() << '\n';
  }
  text << "ensemble(V=" << ens.members.size() << ")," << ens.bits_total << "," << ev.report.csv_row() << '\n';
  out << text.str();
  if (!a.out.empty()) {
    write_report(a.out, text.str());
    RunManifest m = base;
    m.seeds.emplace_back("split", std::to_string(a.split_seed));
    m.artifacts.emplace_back("ensemble_manifest", a.manifest);
    m.artifacts.emplace_back("dataset", a.data);
    m.artifacts.emplace_back("report", a.out);
    m.resolved.set("split", a.split);
    m.save(a.out);
  }
  return kExitOk;
}

struct CountArgs {
  std::string config;
  bool published = false;
};

int cmd_count(const CountArgs& a, std::ostream& out) {
  if (!a.published) {
    ModelConfig mc;
    if (!a.config.empty()) {
      const KeyValueConfig kv = KeyValueConfig::load(a.config);
      std::set<std::string> allowed = ModelConfig::keys();
      allowed.insert(TrainConfig::keys().begin(), TrainConfig::keys().end());
      kv.require_keys(allowed, {});
      mc = model_from_run_config(kv);
    }
    const ComplexityCount c = count_complexity(mc);
    out << "component,params,flops\n"
        << "encoder," << c.encoder_params << "," << c.encoder_flops << '\n'
        << "decoder," << c.decoder_params << "," << c.decoder_flops << '\n';
    return kExitOk;
  }
  const auto rows = published_complexity_rows();
  out << "M,component,quantity,count,reference,deviation,tolerance,status\n";
  auto line = [&](int m, const char* comp, const char* what, std::uint64_t v, double ref, double tol) {
    const double dev = relative_deviation(static_cast<double>(v), ref);
    out << m << "," << comp << "," << what << "," << v << "," << fmt("%.5g", ref) << "," << fmt("%+.3f%%", 100 * dev)
        << "," << fmt("%.0f%%", 100 * tol) << "," << (std::abs(dev) <= tol ? "PASS" : "FAIL") << '\n';
  };
  for (const auto& r : rows) {
    line(r.bits_total, "encoder", "params", r.count.encoder_params, r.ref_encoder_params, kParamTolerance);
    line(r.bits_total, "decoder", "params", r.count.decoder_params, r.ref_decoder_params, kParamTolerance);
    line(r.bits_total, "encoder", "flops", r.count.encoder_flops, r.ref_encoder_flops, kFlopTolerance);
    line(r.bits_total, "decoder", "flops", r.count.decoder_flops, r.ref_decoder_flops, kFlopTolerance);
  }
  const double spread = parameter_spread(rows);
  out << "spread over M: " << fmt("%.3f%%", 100 * spread) << " (tolerance " << fmt("%.1f%%", 100 * kSpreadTolerance)
      << ") " << (spread < kSpreadTolerance ? "PASS" : "FAIL") << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Eigenvector CSI feedback with a Transformer autoencoder", "evcsi"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic eigenvector dataset");
  g->add_option("--out", gen.out, "Output dataset path")->required();
  g->add_option("--samples", gen.samples, "Number of samples")->capture_default_str();
  g->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  g->add_option("--profile", gen.profile, "Channel profile")
      ->check(CLI::IsMember({"desk", "flat", "selective"}))
      ->capture_default_str();
  g->add_option("--n-tx", gen.n_tx, "Transmit antennas");
  g->add_option("--n-rx", gen.n_rx, "Receive antennas");
  g->add_option("--n-subband", gen.n_subband, "Subbands");
  g->add_option("--n-cluster", gen.n_cluster, "Clusters");
  g->add_option("--n-subpath", gen.n_subpath, "Rays per cluster");
  g->add_option("--delay-spread", gen.delay_spread, "Delay spread in seconds");
  g->add_option("--angle-spread", gen.angle_spread, "Intra-cluster angle spread in degrees");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--data", train.data, "Dataset path")->required();
  t->add_option("--config", train.config, "Run config file")->required();
  t->add_option("--out", train.out, "Output weight archive")->required();
  t->add_option("--log", train.log, "Metric log CSV (default <out>.log.csv)");
  t->add_flag("--quiet", train.quiet, "Suppress per-epoch progress");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a trained model");
  e->add_option("--data", ev.data, "Dataset path")->required();
  e->add_option("--weights", ev.weights, "Weight archive")->required();
  e->add_option("--split", ev.split, "Evaluated part")
      ->check(CLI::IsMember({"all", "train", "val"}))
      ->capture_default_str();
  e->add_option("--out", ev.out, "Report CSV path");

  BaselineArgs bl;
  auto* b = app.add_subcommand("baseline", "Evaluate the DFT-grid codebook baseline");
  b->add_option("--data", bl.data, "Dataset path")->required();
  b->add_option("--oversample", bl.oversample, "Oversampling factor")->capture_default_str();
  b->add_option("--split", bl.split, "Evaluated part")
      ->check(CLI::IsMember({"all", "train", "val"}))
      ->capture_default_str();
  b->add_option("--split-seed", bl.split_seed, "Split seed")->capture_default_str();
  b->add_option("--train-fraction", bl.train_fraction, "Training fraction")->capture_default_str();
  b->add_option("--out", bl.out, "Report CSV path");

  EnsembleArgs en;
  auto* n = app.add_subcommand("ensemble", "Evaluate a model ensemble");
  n->add_option("--manifest", en.manifest, "Ensemble manifest")->required();
  n->add_option("--data", en.data, "Dataset path")->required();
  n->add_option("--split", en.split, "Evaluated part")
      ->check(CLI::IsMember({"all", "train", "val"}))
      ->capture_default_str();
  n->add_option("--split-seed", en.split_seed, "Split seed")->capture_default_str();
  n->add_option("--train-fraction", en.train_fraction, "Training fraction")->capture_default_str();
  n->add_option("--out", en.out, "Report CSV path");

  CountArgs cnt;
  auto* c = app.add_subcommand("count", "Count parameters and FLOPs");
  c->add_option("--config", cnt.config, "Run config file (desk defaults otherwise)");
  c->add_flag("--published", cnt.published, "Compare the published configuration against its table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunManifest base;
  base.argv = join_argv(argc, argv);
  try {
    if (*g) {
      base.command = "gen";
      return cmd_gen(gen, base, out);
    }
    if (*t) {
      base.command = "train";
      return cmd_train(train, base, out);
    }
    if (*e) {
      base.command = "eval";
      return cmd_eval(ev, base, out);
    }
    if (*b) {
      base.command = "baseline";
      return cmd_baseline(bl, base, out);
    }
    if (*n) {
      base.command = "ensemble";
      return cmd_ensemble(en, base, out);
    }
    if (*c) return cmd_count(cnt, out);
  } catch (const DimensionMismatchError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitDimension;
  } catch (const IoError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitIo;
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace evcsi
