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

#include "evcsi/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "evcsi/binary_io.hpp"
#include "evcsi/errors.hpp"

namespace evcsi {

namespace {
constexpr std::uint32_t kBitstreamVersion = 1;
}

Bitstream::Bitstream(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto& b : bits_) {
    if (b > 1) throw ContractError("Bitstream: bit values must be 0 or 1");
  }
}

std::vector<std::uint8_t> Bitstream::to_bytes() const {
  std::vector<std::uint8_t> bytes((bits_.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return bytes;
}

Bitstream Bitstream::from_bytes(std::span<const std::uint8_t> bytes, std::size_t n_bits) {
  if (bytes.size() != (n_bits + 7) / 8) {
    throw ContractError("Bitstream::from_bytes: " + std::to_string(bytes.size()) +
                        " bytes cannot hold exactly " + std::to_string(n_bits) + " bits");
  }
  std::vector<std::uint8_t> bits(n_bits);
  for (std::size_t i = 0; i < n_bits; ++i) bits[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
  return Bitstream(std::move(bits));
}

Bitstream Bitstream::concat(const Bitstream& tail) const {
  std::vector<std::uint8_t> bits = bits_;
  bits.insert(bits.end(), tail.bits_.begin(), tail.bits_.end());
  return Bitstream(std::move(bits));
}

Bitstream Bitstream::sub(std::size_t offset, std::size_t length) const {
  if (offset + length > bits_.size()) throw ContractError("Bitstream::sub: range out of bounds");
  return Bitstream(std::vector<std::uint8_t>(bits_.begin() + static_cast<std::ptrdiff_t>(offset),
                                             bits_.begin() + static_cast<std::ptrdiff_t>(offset + length)));
}

void validate_bits_per_symbol(int bits) {
  if (bits < 1 || bits > 8) {
    throw ConfigError("quantizer: bits per symbol must lie in [1, 8], got " + std::to_string(bits));
  }
}

std::vector<std::uint32_t> quantize_uniform(std::span<const double> v, int bits,
                                            QuantDiagnostics* diagnostics) {
  validate_bits_per_symbol(bits);
  const std::uint32_t levels = 1u << bits;
  std::vector<std::uint32_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (diagnostics && (v[i] < -1e-6 || v[i] > 1.0 + 1e-6)) ++diagnostics->out_of_range;
    const double x = std::clamp(v[i], 0.0, 1.0);
    out[i] = std::min(static_cast<std::uint32_t>(std::floor(x * levels)), levels - 1);
  }
  return out;
}

std::vector<double> dequantize_uniform(std::span<const std::uint32_t> indices, int bits) {
  validate_bits_per_symbol(bits);
  const std::uint32_t levels = 1u << bits;
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= levels) {
      throw ContractError("dequantize_uniform: index " + std::to_string(indices[i]) +
                          " out of range for " + std::to_string(bits) + " bits");
    }
    out[i] = (indices[i] + 0.5) / levels;
  }
  return out;
}

std::vector<double> ste_gradient(std::span<const double> upstream) {
  return {upstream.begin(), upstream.end()};
}

Bitstream pack_bits(std::span<const std::uint32_t> indices, int bits) {
  validate_bits_per_symbol(bits);
  std::vector<std::uint8_t> out;
  out.reserve(indices.size() * static_cast<std::size_t>(bits));
  for (std::uint32_t idx : indices) {
    if (idx >= (1u << bits)) throw ContractError("pack_bits: index does not fit in " + std::to_string(bits) + " bits");
    for (int b = bits - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((idx >> b) & 1u));
  }
  return Bitstream(std::move(out));
}

std::vector<std::uint32_t> unpack_bits(const Bitstream& stream, int bits) {
  validate_bits_per_symbol(bits);
  if (stream.size() % static_cast<std::size_t>(bits) != 0) {
    throw ContractError("unpack_bits: " + std::to_string(stream.size()) +
                        " bits is not a multiple of " + std::to_string(bits));
  }
  std::vector<std::uint32_t> out(stream.size() / static_cast<std::size_t>(bits), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int b = 0; b < bits; ++b) out[i] = (out[i] << 1) | (stream.bit(i * bits + b) ? 1u : 0u);
  }
  return out;
}

ndiff::DiffTensor quantize_ste(const ndiff::DiffTensor& v, int bits, QuantDiagnostics* diagnostics) {
  const auto idx = quantize_uniform(v.values(), bits, diagnostics);
  const auto deq = dequantize_uniform(idx, bits);
  return ndiff::make_unary(
      v, v.shape(), ndiff::Buffer(deq.begin(), deq.end()),
      [](ndiff::Node& self) {
        ndiff::Node& in = *self.parents[0];
        if (!in.requires_grad) return;
        const auto g = ste_gradient(self.grad);
        for (std::size_t i = 0; i < g.size(); ++i) in.grad[i] += g[i];
      },
      "quantize_ste");
}

void write_bitstreams(std::ostream& os, std::span<const Bitstream> streams, std::size_t n_bits) {
  binio::put_magic(os, "EVCB");
  binio::put_le<std::uint32_t>(os, kBitstreamVersion);
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(streams.size()));
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(n_bits));
  for (const auto& s : streams) {
    if (s.size() != n_bits) throw ContractError("write_bitstreams: payload length differs from M");
    const auto bytes = s.to_bytes();
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  if (!os) throw IoError("write_bitstreams: stream write failed");
}

std::vector<Bitstream> read_bitstreams(std::istream& is) {
  binio::expect_magic(is, "EVCB");
  const auto version = binio::get_le<std::uint32_t>(is);
  if (version != kBitstreamVersion) throw IoError("unsupported EVCB version " + std::to_string(version));
  const auto n = binio::get_le<std::uint32_t>(is);
  const auto m = binio::get_le<std::uint32_t>(is);
  std::vector<Bitstream> out;
  out.reserve(n);
  std::vector<std::uint8_t> bytes((m + 7) / 8);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
      throw IoError("read_bitstreams: truncated file");
    }
    out.push_back(Bitstream::from_bytes(bytes, m));
  }
  return out;
}

void save_bitstreams(const std::filesystem::path& path, std::span<const Bitstream> streams,
                     std::size_t n_bits) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_bitstreams(os, streams, n_bits);
}

std::vector<Bitstream> load_bitstreams(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_bitstreams(is);
}

}  // namespace evcsi
