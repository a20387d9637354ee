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

#include "evcsi/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "evcsi/binary_io.hpp"
#include "evcsi/errors.hpp"
#include "evcsi/rng.hpp"

namespace evcsi {

using ndiff::DiffTensor;
using ndiff::Shape;

namespace {

constexpr std::uint32_t kWeightVersion = 1;
constexpr double kPositionalStd = 0.02;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("ModelConfig: " + what);
}

void append_block_specs(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t e,
                        std::size_t hidden) {
  for (const char* proj : {"q", "k", "v", "o"}) {
    out.push_back({prefix + "attn.w" + proj, {e, e}, InitKind::kXavier, true});
    out.push_back({prefix + "attn.b" + proj, {e}, InitKind::kZero, false});
  }
  out.push_back({prefix + "ln1.gain", {e}, InitKind::kOne, false});
  out.push_back({prefix + "ln1.bias", {e}, InitKind::kZero, false});
  out.push_back({prefix + "ffn.w1", {e, hidden}, InitKind::kXavier, true});
  out.push_back({prefix + "ffn.b1", {hidden}, InitKind::kZero, false});
  out.push_back({prefix + "ffn.w2", {hidden, e}, InitKind::kXavier, true});
  out.push_back({prefix + "ffn.b2", {e}, InitKind::kZero, false});
  out.push_back({prefix + "ln2.gain", {e}, InitKind::kOne, false});
  out.push_back({prefix + "ln2.bias", {e}, InitKind::kZero, false});
}

}  // namespace

void ModelConfig::validate() const {
  require(n_e > 0 && n_b > 0 && n_head > 0 && k_h > 0, "n_e, n_b, n_head, k_h must be positive");
  require(n_tx > 0 && n_subband > 0, "n_tx and n_subband must be positive");
  require(bits_total > 0, "bits_total must be positive");
  require(n_e % n_head == 0, "n_e (" + std::to_string(n_e) + ") must be divisible by n_head (" +
                                 std::to_string(n_head) + ")");
  validate_bits_per_symbol(bits_per_symbol);
  require(bits_total % bits_per_symbol == 0, "bits_total (" + std::to_string(bits_total) +
                                                 ") must be divisible by bits_per_symbol (" +
                                                 std::to_string(bits_per_symbol) + ")");
}

const std::set<std::string>& ModelConfig::keys() {
  static const std::set<std::string> k{"n_e",       "n_b",             "n_head", "k_h",
                                       "bits_total", "bits_per_symbol", "n_tx",   "n_subband"};
  return k;
}

void ModelConfig::to_kv(KeyValueConfig& kv) const {
  kv.set("n_e", n_e);
  kv.set("n_b", n_b);
  kv.set("n_head", n_head);
  kv.set("k_h", k_h);
  kv.set("bits_total", bits_total);
  kv.set("bits_per_symbol", bits_per_symbol);
  kv.set("n_tx", n_tx);
  kv.set("n_subband", n_subband);
}

ModelConfig ModelConfig::from_kv(const KeyValueConfig& kv) {
  ModelConfig c;
  c.n_e = kv.get_int("n_e");
  c.n_b = kv.get_int("n_b");
  c.n_head = kv.get_int("n_head");
  c.k_h = kv.get_int("k_h");
  c.bits_total = kv.get_int("bits_total");
  c.bits_per_symbol = kv.get_int("bits_per_symbol");
  c.n_tx = kv.get_int("n_tx");
  c.n_subband = kv.get_int("n_subband");
  c.validate();
  return c;
}

std::vector<ParamSpec> parameter_specs(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t e = cfg.n_e;
  const std::size_t s = cfg.n_subband;
  const std::size_t in = 2 * static_cast<std::size_t>(cfg.n_tx);
  const std::size_t hidden = static_cast<std::size_t>(cfg.k_h) * e;
  const std::size_t sym = cfg.symbols();

  std::vector<ParamSpec> out;
  out.push_back({"enc.embed.w", {in, e}, InitKind::kXavier, true});
  out.push_back({"enc.embed.b", {e}, InitKind::kZero, false});
  out.push_back({"enc.pos", {s, e}, InitKind::kPositional, false});
  for (int b = 0; b < cfg.n_b; ++b) {
    append_block_specs(out, "enc.block" + std::to_string(b) + ".", e, hidden);
  }
  out.push_back({"enc.head.w", {s * e, sym}, InitKind::kXavier, true});
  out.push_back({"enc.head.b", {sym}, InitKind::kZero, false});

  out.push_back({"dec.input.w", {sym, s * e}, InitKind::kXavier, true});
  out.push_back({"dec.input.b", {s * e}, InitKind::kZero, false});
  out.push_back({"dec.pos", {s, e}, InitKind::kPositional, false});
  for (int b = 0; b < cfg.n_b; ++b) {
    append_block_specs(out, "dec.block" + std::to_string(b) + ".", e, hidden);
  }
  out.push_back({"dec.head.w", {e, in}, InitKind::kXavier, true});
  out.push_back({"dec.head.b", {in}, InitKind::kZero, false});
  return out;
}

ModelWeights::ModelWeights(const ModelWeights& other) : names_(other.names_), index_(other.index_) {
  tensors_.reserve(other.tensors_.size());
  for (const auto& t : other.tensors_) tensors_.push_back(t.clone());
}

ModelWeights& ModelWeights::operator=(const ModelWeights& other) {
  if (this != &other) {
    ModelWeights copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void ModelWeights::add(const std::string& name, DiffTensor tensor) {
  if (index_.count(name)) throw ContractError("ModelWeights: duplicate parameter " + name);
  index_[name] = tensors_.size();
  names_.push_back(name);
  tensors_.push_back(std::move(tensor));
}

void ModelWeights::replace(const std::string& name, DiffTensor tensor) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ModelWeights: no parameter named " + name);
  tensors_[it->second] = std::move(tensor);
}

bool ModelWeights::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

const DiffTensor& ModelWeights::at(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("ModelWeights: no parameter named " + std::string(name));
  return tensors_[it->second];
}

DiffTensor& ModelWeights::at(std::string_view name) {
  return const_cast<DiffTensor&>(std::as_const(*this).at(name));
}

std::size_t ModelWeights::total_size() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

void ModelWeights::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

bool ModelWeights::same_values(const ModelWeights& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.shape() != b.shape()) return false;
    if (!std::equal(a.values().begin(), a.values().end(), b.values().begin())) return false;
  }
  return true;
}

DiffTensor init_parameter(const ParamSpec& spec, std::uint64_t seed) {
  const std::size_t n = ndiff::numel(spec.shape);
  std::vector<double> v(n, 0.0);
  Rng rng = make_rng(seed, fnv1a(spec.name), 2);
  switch (spec.init) {
    case InitKind::kZero: break;
    case InitKind::kOne: std::fill(v.begin(), v.end(), 1.0); break;
    case InitKind::kPositional: {
      std::normal_distribution<double> g(0.0, kPositionalStd);
      for (auto& x : v) x = g(rng);
      break;
    }
    case InitKind::kXavier: {
      const double fan_in = static_cast<double>(spec.shape.at(0));
      const double fan_out = static_cast<double>(spec.shape.at(1));
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (auto& x : v) x = u(rng);
      break;
    }
  }
  return DiffTensor::parameter(spec.shape, std::move(v));
}

ModelWeights init_model(const ModelConfig& cfg, std::uint64_t seed) {
  ModelWeights w;
  for (const auto& spec : parameter_specs(cfg)) w.add(spec.name, init_parameter(spec, seed));
  return w;
}

void check_weights(const ModelWeights& w, const ModelConfig& cfg) {
  const auto specs = parameter_specs(cfg);
  if (specs.size() != w.count()) {
    throw DimensionMismatchError("weights hold " + std::to_string(w.count()) +
                                 " tensors, config expects " + std::to_string(specs.size()));
  }
  for (const auto& spec : specs) {
    if (!w.contains(spec.name)) throw DimensionMismatchError("weights lack tensor " + spec.name);
    if (w.at(spec.name).shape() != spec.shape) {
      throw DimensionMismatchError("tensor " + spec.name + " has shape " +
                                   ndiff::shape_str(w.at(spec.name).shape()) + ", config expects " +
                                   ndiff::shape_str(spec.shape));
    }
  }
}

DiffTensor csi_to_tokens(std::span<const CsiSample> batch) {
  std::vector<std::size_t> all(batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return csi_to_tokens(batch, all);
}

DiffTensor csi_to_tokens(std::span<const CsiSample> batch, std::span<const std::size_t> pick) {
  if (pick.empty()) throw ContractError("csi_to_tokens: empty batch");
  const std::size_t n_tx = batch[pick[0]].n_tx();
  const std::size_t n_sb = batch[pick[0]].n_subband();
  std::vector<double> v;
  v.reserve(pick.size() * n_sb * 2 * n_tx);
  for (std::size_t idx : pick) {
    const CsiSample& s = batch[idx];
    if (static_cast<std::size_t>(s.n_tx()) != n_tx || static_cast<std::size_t>(s.n_subband()) != n_sb) {
      throw ContractError("csi_to_tokens: inconsistent sample shapes");
    }
    for (std::size_t k = 0; k < n_sb; ++k) {
      for (std::size_t n = 0; n < n_tx; ++n) v.push_back(s.w(n, k).real());
      for (std::size_t n = 0; n < n_tx; ++n) v.push_back(s.w(n, k).imag());
    }
  }
  return DiffTensor::constant({pick.size(), n_sb, 2 * n_tx}, std::move(v));
}

std::vector<CsiSample> tokens_to_csi(const DiffTensor& tokens) {
  if (tokens.rank() != 3 || tokens.dim(2) % 2 != 0) {
    throw ContractError("tokens_to_csi: expected [B, n_subband, 2 n_tx], got " + ndiff::shape_str(tokens.shape()));
  }
  const std::size_t b = tokens.dim(0);
  const std::size_t n_sb = tokens.dim(1);
  const std::size_t n_tx = tokens.dim(2) / 2;
  const auto v = tokens.values();
  std::vector<CsiSample> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    out[i].w.resize(static_cast<Eigen::Index>(n_tx), static_cast<Eigen::Index>(n_sb));
    for (std::size_t k = 0; k < n_sb; ++k) {
      const double* row = v.data() + (i * n_sb + k) * 2 * n_tx;
      for (std::size_t n = 0; n < n_tx; ++n) {
        out[i].w(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)) = Complex(row[n], row[n_tx + n]);
      }
    }
  }
  return out;
}

ndiff::AttentionWeights attention_weights(const ModelWeights& w, const std::string& prefix) {
  return {w.at(prefix + "attn.wq"), w.at(prefix + "attn.bq"), w.at(prefix + "attn.wk"),
          w.at(prefix + "attn.bk"), w.at(prefix + "attn.wv"), w.at(prefix + "attn.bv"),
          w.at(prefix + "attn.wo"), w.at(prefix + "attn.bo")};
}

DiffTensor basic_block(const DiffTensor& x, const ModelWeights& w, const std::string& prefix,
                       const ModelConfig& cfg) {
  if (x.rank() < 2 || x.shape().back() != static_cast<std::size_t>(cfg.n_e) ||
      x.dim(x.rank() - 2) != static_cast<std::size_t>(cfg.n_subband)) {
    throw ContractError("basic_block: input " + ndiff::shape_str(x.shape()) + " is not [.., " +
                        std::to_string(cfg.n_subband) + ", " + std::to_string(cfg.n_e) + "]");
  }
  const DiffTensor attn = ndiff::multi_head_attention(x, attention_weights(w, prefix), cfg.n_head);
  const DiffTensor y = ndiff::layer_norm(ndiff::add(x, attn), w.at(prefix + "ln1.gain"), w.at(prefix + "ln1.bias"));
  const DiffTensor hidden = ndiff::gelu(ndiff::linear(y, w.at(prefix + "ffn.w1"), w.at(prefix + "ffn.b1")));
  const DiffTensor ffn = ndiff::linear(hidden, w.at(prefix + "ffn.w2"), w.at(prefix + "ffn.b2"));
  return ndiff::layer_norm(ndiff::add(y, ffn), w.at(prefix + "ln2.gain"), w.at(prefix + "ln2.bias"));
}

DiffTensor encoder_forward(const ModelWeights& w, const ModelConfig& cfg, const DiffTensor& tokens) {
  if (tokens.rank() != 3 || tokens.dim(1) != static_cast<std::size_t>(cfg.n_subband) ||
      tokens.dim(2) != 2 * static_cast<std::size_t>(cfg.n_tx)) {
    throw ContractError("encoder_forward: input " + ndiff::shape_str(tokens.shape()) +
                        " does not match n_subband=" + std::to_string(cfg.n_subband) +
                        ", n_tx=" + std::to_string(cfg.n_tx));
  }
  DiffTensor h = ndiff::add(ndiff::linear(tokens, w.at("enc.embed.w"), w.at("enc.embed.b")), w.at("enc.pos"));
  for (int b = 0; b < cfg.n_b; ++b) h = basic_block(h, w, "enc.block" + std::to_string(b) + ".", cfg);
  return ndiff::sigmoid(ndiff::linear(ndiff::flatten(h, 1), w.at("enc.head.w"), w.at("enc.head.b")));
}

DiffTensor decoder_forward(const ModelWeights& w, const ModelConfig& cfg, const DiffTensor& symbols) {
  if (symbols.rank() != 2 || symbols.dim(1) != static_cast<std::size_t>(cfg.symbols())) {
    throw ContractError("decoder_forward: input " + ndiff::shape_str(symbols.shape()) + " is not [B, " +
                        std::to_string(cfg.symbols()) + "]");
  }
  const std::size_t batch = symbols.dim(0);
  const DiffTensor dense = ndiff::gelu(ndiff::linear(symbols, w.at("dec.input.w"), w.at("dec.input.b")));
  DiffTensor h = ndiff::add(
      ndiff::reshape(dense, {batch, static_cast<std::size_t>(cfg.n_subband), static_cast<std::size_t>(cfg.n_e)}),
      w.at("dec.pos"));
  for (int b = 0; b < cfg.n_b; ++b) h = basic_block(h, w, "dec.block" + std::to_string(b) + ".", cfg);
  const DiffTensor out = ndiff::linear(h, w.at("dec.head.w"), w.at("dec.head.b"));
  return ndiff::div(out, ndiff::sqrt(ndiff::sum_last(ndiff::square(out))));
}

AutoencoderOutput autoencoder_forward(const ModelWeights& w, const ModelConfig& cfg,
                                      const DiffTensor& tokens, QuantDiagnostics* diagnostics) {
  AutoencoderOutput r;
  r.pre_quant = encoder_forward(w, cfg, tokens);
  r.post_quant = quantize_ste(r.pre_quant, cfg.bits_per_symbol, diagnostics);
  r.output = decoder_forward(w, cfg, r.post_quant);
  return r;
}

std::vector<Bitstream> encode_batch(std::span<const CsiSample> samples, const ModelWeights& w,
                                    const ModelConfig& cfg) {
  if (samples.empty()) return {};
  ndiff::NoGradGuard no_grad;
  const DiffTensor v = encoder_forward(w, cfg, csi_to_tokens(samples));
  const std::size_t sym = cfg.symbols();
  std::vector<Bitstream> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto idx = quantize_uniform(v.values().subspan(i * sym, sym), cfg.bits_per_symbol);
    out.push_back(pack_bits(idx, cfg.bits_per_symbol));
  }
  return out;
}

std::vector<CsiSample> decode_batch(std::span<const Bitstream> streams, const ModelWeights& w,
                                    const ModelConfig& cfg) {
  if (streams.empty()) return {};
  const std::size_t sym = cfg.symbols();
  std::vector<double> v;
  v.reserve(streams.size() * sym);
  for (const auto& s : streams) {
    if (s.size() != static_cast<std::size_t>(cfg.bits_total)) {
      throw ContractError("decode: payload has " + std::to_string(s.size()) + " bits, model expects " +
                          std::to_string(cfg.bits_total));
    }
    const auto deq = dequantize_uniform(unpack_bits(s, cfg.bits_per_symbol), cfg.bits_per_symbol);
    v.insert(v.end(), deq.begin(), deq.end());
  }
  ndiff::NoGradGuard no_grad;
  return tokens_to_csi(decoder_forward(w, cfg, DiffTensor::constant({streams.size(), sym}, std::move(v))));
}

Bitstream encode(const CsiSample& sample, const ModelWeights& w, const ModelConfig& cfg) {
  return encode_batch(std::span(&sample, 1), w, cfg).front();
}

CsiSample decode(const Bitstream& stream, const ModelWeights& w, const ModelConfig& cfg) {
  return decode_batch(std::span(&stream, 1), w, cfg).front();
}

std::vector<CsiSample> reconstruct(std::span<const CsiSample> samples, const ModelWeights& w,
                                   const ModelConfig& cfg, std::size_t batch_size) {
  ndiff::NoGradGuard no_grad;
  std::vector<CsiSample> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, samples.size() - start);
    const auto r = autoencoder_forward(w, cfg, csi_to_tokens(samples.subspan(start, n)));
    auto part = tokens_to_csi(r.output);
    for (auto& s : part) out.push_back(std::move(s));
  }
  return out;
}

ComplexityCount count_complexity(const ModelConfig& cfg) {
  ComplexityCount c;
  for (const auto& spec : parameter_specs(cfg)) {
    const std::uint64_t n = ndiff::numel(spec.shape);
    const bool enc = spec.name.rfind("enc.", 0) == 0;
    (enc ? c.encoder_params : c.decoder_params) += n;
    if (spec.dense_weight) (enc ? c.encoder_flops : c.decoder_flops) += 2 * n;
  }
  return c;
}

void write_weight_archive(std::ostream& os, const ModelWeights& w) {
  binio::put_magic(os, "EVCW");
  binio::put_le<std::uint32_t>(os, kWeightVersion);
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(w.count()));
  for (std::size_t i = 0; i < w.count(); ++i) {
    const std::string& name = w.names()[i];
    const DiffTensor& t = w.tensors()[i];
    if (name.size() > 0xFFFF) throw ContractError("weight name too long: " + name);
    binio::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    binio::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (double v : t.values()) binio::put_f64(os, v);
  }
  if (!os) throw IoError("write_weight_archive: stream write failed");
}

ModelWeights read_weight_archive(std::istream& is) {
  binio::expect_magic(is, "EVCW");
  const auto version = binio::get_le<std::uint32_t>(is);
  if (version != kWeightVersion) throw IoError("unsupported EVCW version " + std::to_string(version));
  const auto count = binio::get_le<std::uint32_t>(is);
  ModelWeights w;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = binio::get_le<std::uint16_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw IoError("read_weight_archive: truncated name");
    const auto rank = binio::get_le<std::uint8_t>(is);
    Shape shape(rank);
    for (auto& d : shape) d = binio::get_le<std::uint32_t>(is);
    std::vector<double> values(ndiff::numel(shape));
    for (auto& v : values) v = binio::get_f64(is);
    w.add(name, DiffTensor::parameter(std::move(shape), std::move(values)));
  }
  return w;
}

std::filesystem::path sidecar_path(const std::filesystem::path& archive) {
  std::filesystem::path p = archive;
  p += ".cfg";
  return p;
}

void save_model(const std::filesystem::path& path, const ModelWeights& w, const ModelConfig& cfg,
                const KeyValueConfig& extra) {
  check_weights(w, cfg);
  std::ostringstream os;
  write_weight_archive(os, w);
  write_file_atomic(path, os.str());
  KeyValueConfig side = extra;
  cfg.to_kv(side);
  side.save(sidecar_path(path));
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open weights " + path.string());
  LoadedModel m;
  m.weights = read_weight_archive(is);
  m.sidecar = KeyValueConfig::load(sidecar_path(path));
  m.cfg = ModelConfig::from_kv(m.sidecar);
  check_weights(m.weights, m.cfg);
  return m;
}

}  // namespace evcsi
