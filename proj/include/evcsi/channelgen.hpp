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

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace evcsi {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Parameters of the synthetic clustered multipath generator. Every cluster
// has n_subpath rays sharing one delay; ray angles scatter uniformly within
// +/- angle_spread_deg of the cluster centre.
struct ChannelParams {
  int n_tx = 8;
  int n_rx = 2;
  int n_subband = 12;
  int n_cluster = 4;
  int n_subpath = 5;
  double delay_spread = 100e-9;  // seconds, 0 gives a flat channel
  double angle_spread_deg = 5.0;
  double carrier_hz = 3.5e9;     // recorded for provenance; baseband model only uses offsets
  double subcarrier_hz = 15e3;
  int n_rb = 48;

  // Throws ConfigError when any invariant is violated.
  void validate() const;

  // Offset of subband k's centre from the carrier, in Hz:
  // (k - (n_subband - 1) / 2) * (n_rb / n_subband) * 12 * subcarrier_hz.
  double subband_offset_hz(int k) const;
};

// Named presets used by the CLI: "desk", "flat" and "selective".
ChannelParams channel_profile(const std::string& name);

struct FreqChannel {
  std::vector<CMatrix> blocks;  // n_subband blocks, each n_rx x n_tx
};

// Per-subband eigenvector CSI: column k is the (unit-norm, phase-canonical)
// dominant eigenvector of subband k.
struct CsiSample {
  CMatrix w;  // n_tx x n_subband

  int n_tx() const { return static_cast<int>(w.rows()); }
  int n_subband() const { return static_cast<int>(w.cols()); }
  bool operator==(const CsiSample&) const = default;
};

struct EigenPair {
  CVector w;
  double lambda = 0.0;
  int iterations = 0;
};

struct PowerIterationOptions {
  int max_iterations = 500;
  double rq_tolerance = 1e-10;  // relative change of the Rayleigh quotient
  int squarings = 3;            // iterate on (H^H H)^(2^squarings)
};

// Rotates v so that its largest-modulus entry (lowest index on ties) is real
// and nonnegative. Idempotent.
void canonicalize_phase(Eigen::Ref<CVector> v);
CVector canonical_phase(const CVector& v);

FreqChannel synth_freq_channel(const ChannelParams& params, std::uint64_t master_seed,
                               std::uint64_t sample_index);

// Dominant eigenpair of H^H H by power iteration.
EigenPair dominant_eigenvector(const CMatrix& h, const PowerIterationOptions& options = {});

CsiSample extract_csi(const FreqChannel& hf);

struct Dataset {
  std::vector<CsiSample> samples;
  std::uint64_t split_seed = 0;
  double train_fraction = 0.8;

  std::size_t size() const { return samples.size(); }
  std::size_t train_count() const;
  // Index lists are a pure function of (split_seed, train_fraction, size()).
  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> validation_indices() const;

 private:
  std::vector<std::size_t> permutation() const;
};

Dataset build_dataset(const ChannelParams& params, std::size_t n_samples,
                      std::uint64_t master_seed);

// "EVCS v1" container: magic, u32 version, n_samples, n_tx, n_subband, then
// per sample per column n_tx (re, im) float32 pairs, all little-endian.
void write_dataset(std::ostream& os, const std::vector<CsiSample>& samples);
std::vector<CsiSample> read_dataset(std::istream& is);
void save_dataset(const std::filesystem::path& path, const std::vector<CsiSample>& samples);
std::vector<CsiSample> load_dataset(const std::filesystem::path& path);

struct DatasetHeader {
  std::uint32_t version = 0;
  std::uint32_t n_samples = 0;
  std::uint32_t n_tx = 0;
  std::uint32_t n_subband = 0;
};
DatasetHeader read_dataset_header(std::istream& is);

}  // namespace evcsi
