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
#include <vector>

#include "evcsi/ndiff.hpp"

namespace evcsi {

// Fixed-length feedback payload. Bits are stored one per element (0 or 1)
// in transmission order.
class Bitstream {
 public:
  Bitstream() = default;
  explicit Bitstream(std::vector<std::uint8_t> bits);

  std::size_t size() const { return bits_.size(); }
  bool bit(std::size_t i) const { return bits_.at(i) != 0; }
  void flip(std::size_t i) { bits_.at(i) ^= 1u; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  // MSB-first packing, zero padded to a byte boundary.
  std::vector<std::uint8_t> to_bytes() const;
  static Bitstream from_bytes(std::span<const std::uint8_t> bytes, std::size_t n_bits);

  Bitstream concat(const Bitstream& tail) const;
  Bitstream sub(std::size_t offset, std::size_t length) const;

  bool operator==(const Bitstream&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct QuantDiagnostics {
  std::size_t out_of_range = 0;  // inputs outside [0, 1] by more than 1e-6
};

void validate_bits_per_symbol(int bits);

// index = min(floor(v * 2^B), 2^B - 1) after clamping v to [0, 1].
std::vector<std::uint32_t> quantize_uniform(std::span<const double> v, int bits,
                                            QuantDiagnostics* diagnostics = nullptr);
// Bin centres: (index + 0.5) / 2^B.
std::vector<double> dequantize_uniform(std::span<const std::uint32_t> indices, int bits);

// Backward rule of the quantize/dequantize pair: identity.
std::vector<double> ste_gradient(std::span<const double> upstream);

Bitstream pack_bits(std::span<const std::uint32_t> indices, int bits);
std::vector<std::uint32_t> unpack_bits(const Bitstream& stream, int bits);

// Differentiable quantize -> dequantize with the straight-through backward.
ndiff::DiffTensor quantize_ste(const ndiff::DiffTensor& v, int bits,
                               QuantDiagnostics* diagnostics = nullptr);

// "EVCB v1": magic, u32 version, u32 n_samples, u32 M, then ceil(M/8) bytes
// per sample.
void write_bitstreams(std::ostream& os, std::span<const Bitstream> streams, std::size_t n_bits);
std::vector<Bitstream> read_bitstreams(std::istream& is);
void save_bitstreams(const std::filesystem::path& path, std::span<const Bitstream> streams,
                     std::size_t n_bits);
std::vector<Bitstream> load_bitstreams(const std::filesystem::path& path);

}  // namespace evcsi
