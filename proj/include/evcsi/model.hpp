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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "evcsi/channelgen.hpp"
#include "evcsi/config.hpp"
#include "evcsi/ndiff.hpp"
#include "evcsi/quantizer.hpp"

namespace evcsi {

struct ModelConfig {
  int n_e = 64;              // embedding width
  int n_b = 2;               // basic blocks per side
  int n_head = 4;
  int k_h = 2;               // feedforward expansion
  int bits_total = 32;       // M
  int bits_per_symbol = 2;   // B
  int n_tx = 8;
  int n_subband = 12;

  void validate() const;
  int symbols() const { return bits_total / bits_per_symbol; }
  bool operator==(const ModelConfig&) const = default;

  void to_kv(KeyValueConfig& kv) const;
  static ModelConfig from_kv(const KeyValueConfig& kv);
  static const std::set<std::string>& keys();
};

enum class InitKind { kXavier, kZero, kOne, kPositional };

struct ParamSpec {
  std::string name;
  ndiff::Shape shape;
  InitKind init;
  bool dense_weight;  // counted by the FLOP convention
};

// Every trainable tensor of the architecture, encoder ("enc.") first.
std::vector<ParamSpec> parameter_specs(const ModelConfig& cfg);

// Named parameter collection with value semantics: copies are deep.
class ModelWeights {
 public:
  ModelWeights() = default;
  ModelWeights(const ModelWeights& other);
  ModelWeights& operator=(const ModelWeights& other);
  ModelWeights(ModelWeights&&) noexcept = default;
  ModelWeights& operator=(ModelWeights&&) noexcept = default;

  void add(const std::string& name, ndiff::DiffTensor tensor);
  void replace(const std::string& name, ndiff::DiffTensor tensor);
  bool contains(std::string_view name) const;
  const ndiff::DiffTensor& at(std::string_view name) const;
  ndiff::DiffTensor& at(std::string_view name);

  std::size_t count() const { return tensors_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<ndiff::DiffTensor>& tensors() { return tensors_; }
  const std::vector<ndiff::DiffTensor>& tensors() const { return tensors_; }
  std::size_t total_size() const;
  void zero_grad();

  // Exact equality of names, shapes and values.
  bool same_values(const ModelWeights& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<ndiff::DiffTensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Xavier-uniform dense weights, zero biases, N(0, 0.02^2) positional vectors,
// unit layer-norm gains. Each tensor draws from its own (seed, name)
// substream.
ModelWeights init_model(const ModelConfig& cfg, std::uint64_t seed);
ndiff::DiffTensor init_parameter(const ParamSpec& spec, std::uint64_t seed);

// --- forward pieces -------------------------------------------------------

// [B, n_subband, 2 n_tx] tokens, token k = [Re(w_k); Im(w_k)].
ndiff::DiffTensor csi_to_tokens(std::span<const CsiSample> batch);
ndiff::DiffTensor csi_to_tokens(std::span<const CsiSample> batch, std::span<const std::size_t> pick);
std::vector<CsiSample> tokens_to_csi(const ndiff::DiffTensor& tokens);

ndiff::AttentionWeights attention_weights(const ModelWeights& w, const std::string& prefix);

// Post-norm block: y = LN(x + MHA(x)); out = LN(y + FFN(y)).
ndiff::DiffTensor basic_block(const ndiff::DiffTensor& x, const ModelWeights& w,
                              const std::string& prefix, const ModelConfig& cfg);

// Encoder up to the logistic squash: [B, M/B] values in (0, 1).
ndiff::DiffTensor encoder_forward(const ModelWeights& w, const ModelConfig& cfg,
                                  const ndiff::DiffTensor& tokens);
// Decoder from dequantized symbols to unit-norm per-subband tokens.
ndiff::DiffTensor decoder_forward(const ModelWeights& w, const ModelConfig& cfg,
                                  const ndiff::DiffTensor& symbols);

struct AutoencoderOutput {
  ndiff::DiffTensor pre_quant;   // v
  ndiff::DiffTensor post_quant;  // v'
  ndiff::DiffTensor output;      // [B, n_subband, 2 n_tx]
};

AutoencoderOutput autoencoder_forward(const ModelWeights& w, const ModelConfig& cfg,
                                      const ndiff::DiffTensor& tokens,
                                      QuantDiagnostics* diagnostics = nullptr);

// --- feedback interface ---------------------------------------------------

Bitstream encode(const CsiSample& sample, const ModelWeights& w, const ModelConfig& cfg);
CsiSample decode(const Bitstream& stream, const ModelWeights& w, const ModelConfig& cfg);
std::vector<Bitstream> encode_batch(std::span<const CsiSample> samples, const ModelWeights& w,
                                    const ModelConfig& cfg);
std::vector<CsiSample> decode_batch(std::span<const Bitstream> streams, const ModelWeights& w,
                                    const ModelConfig& cfg);
// decode(encode(.)) without materializing the bits; identical numerics.
std::vector<CsiSample> reconstruct(std::span<const CsiSample> samples, const ModelWeights& w,
                                   const ModelConfig& cfg, std::size_t batch_size = 256);

// --- complexity -----------------------------------------------------------

struct ComplexityCount {
  std::uint64_t encoder_params = 0;
  std::uint64_t decoder_params = 0;
  // 2 FLOPs per multiply-accumulate, each dense weight matrix applied once.
  std::uint64_t encoder_flops = 0;
  std::uint64_t decoder_flops = 0;
};

ComplexityCount count_complexity(const ModelConfig& cfg);

// --- persistence ----------------------------------------------------------

// "EVCW v1": magic, u32 version, u32 tensor count; per tensor u16 name
// length, name bytes, u8 rank, u32 dims, f64 values; little-endian.
void write_weight_archive(std::ostream& os, const ModelWeights& w);
ModelWeights read_weight_archive(std::istream& is);

std::filesystem::path sidecar_path(const std::filesystem::path& archive);

// Writes the archive plus a "<archive>.cfg" key-value sidecar holding every
// ModelConfig field and any extra entries.
void save_model(const std::filesystem::path& path, const ModelWeights& w, const ModelConfig& cfg,
                const KeyValueConfig& extra = {});

struct LoadedModel {
  ModelConfig cfg;
  ModelWeights weights;
  KeyValueConfig sidecar;
};

LoadedModel load_model(const std::filesystem::path& path);

// Checks names and shapes against parameter_specs(cfg).
void check_weights(const ModelWeights& w, const ModelConfig& cfg);

}  // namespace evcsi
