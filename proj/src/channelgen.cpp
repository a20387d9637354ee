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

#include "evcsi/channelgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "evcsi/binary_io.hpp"
#include "evcsi/errors.hpp"
#include "evcsi/rng.hpp"

namespace evcsi {

namespace {

constexpr std::uint64_t kChannelStreamTag = 1;
constexpr std::uint32_t kDatasetVersion = 1;

// Half-wavelength ULA response, unnormalized (squared norm equals n).
CVector ula_response(int n, double angle) {
  CVector a(n);
  const double phase = std::numbers::pi * std::sin(angle);
  for (int i = 0; i < n; ++i) {
    a(i) = std::polar(1.0, phase * i);
  }
  return a;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("ChannelParams: " + what);
}

}  // namespace

void ChannelParams::validate() const {
  require(n_tx >= 1, "n_tx must be >= 1");
  require(n_rx >= 1, "n_rx must be >= 1");
  require(n_subband >= 1, "n_subband must be >= 1");
  require(n_cluster >= 1, "n_cluster must be >= 1");
  require(n_subpath >= 1, "n_subpath must be >= 1");
  require(std::isfinite(delay_spread) && delay_spread >= 0.0, "delay_spread must be >= 0");
  require(std::isfinite(angle_spread_deg) && angle_spread_deg >= 0.0,
          "angle_spread_deg must be >= 0");
  require(std::isfinite(subcarrier_hz) && subcarrier_hz > 0.0, "subcarrier_hz must be > 0");
  require(std::isfinite(carrier_hz) && carrier_hz > 0.0, "carrier_hz must be > 0");
  require(n_rb >= n_subband, "n_rb must be >= n_subband");
}

double ChannelParams::subband_offset_hz(int k) const {
  const double rb_per_subband = static_cast<double>(n_rb) / n_subband;
  return (k - 0.5 * (n_subband - 1)) * rb_per_subband * 12.0 * subcarrier_hz;
}

ChannelParams channel_profile(const std::string& name) {
  ChannelParams p;
  if (name == "desk") return p;
  if (name == "flat") {
    p.delay_spread = 0.0;
    return p;
  }
  if (name == "selective") {
    p.delay_spread = 300e-9;
    return p;
  }
  throw ConfigError("unknown channel profile \"" + name + "\" (expected desk, flat, selective)");
}

FreqChannel synth_freq_channel(const ChannelParams& params, std::uint64_t master_seed,
                               std::uint64_t sample_index) {
  params.validate();
  Rng rng = make_rng(master_seed, sample_index, kChannelStreamTag);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> centre(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
  const double spread = params.angle_spread_deg * std::numbers::pi / 180.0;
  std::uniform_real_distribution<double> offset(-spread, spread);

  // Normalized excess delays; the exponential power profile is expressed in
  // the same units so powers do not depend on the delay spread itself.
  std::vector<double> excess(params.n_cluster);
  for (auto& e : excess) e = expo(rng);
  const double first = *std::min_element(excess.begin(), excess.end());
  std::vector<double> power(params.n_cluster);
  for (int d = 0; d < params.n_cluster; ++d) {
    excess[d] -= first;
    power[d] = std::exp(-excess[d]);
  }
  const double total = std::accumulate(power.begin(), power.end(), 0.0);

  std::vector<double> offsets(params.n_subband);
  for (int k = 0; k < params.n_subband; ++k) offsets[k] = params.subband_offset_hz(k);

  FreqChannel hf;
  hf.blocks.assign(params.n_subband, CMatrix::Zero(params.n_rx, params.n_tx));
  for (int d = 0; d < params.n_cluster; ++d) {
    const double tau = params.delay_spread * excess[d];
    const double ray_power = power[d] / total / params.n_subpath;
    const double aod = centre(rng);
    const double aoa = centre(rng);
    CMatrix cluster = CMatrix::Zero(params.n_rx, params.n_tx);
    for (int l = 0; l < params.n_subpath; ++l) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      const Complex gain = Complex(re, im) * std::sqrt(0.5 * ray_power);
      const double ray_aod = aod + offset(rng);
      const double ray_aoa = aoa + offset(rng);
      cluster += gain * ula_response(params.n_rx, ray_aoa) *
                 ula_response(params.n_tx, ray_aod).adjoint();
    }
    for (int k = 0; k < params.n_subband; ++k) {
      hf.blocks[k] += cluster * std::polar(1.0, -2.0 * std::numbers::pi * offsets[k] * tau);
    }
  }
  return hf;
}

void canonicalize_phase(Eigen::Ref<CVector> v) {
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > best_abs) {
      best_abs = a;
      best = i;
    }
  }
  if (best_abs <= 0.0) return;
  const Complex rot = std::conj(v(best)) / best_abs;
  v *= rot;
  v(best) = Complex(best_abs, 0.0);
}

CVector canonical_phase(const CVector& v) {
  CVector out = v;
  canonicalize_phase(out);
  return out;
}

EigenPair dominant_eigenvector(const CMatrix& h, const PowerIterationOptions& options) {
  if (!h.allFinite()) throw DegenerateInputError("dominant_eigenvector: non-finite entries");
  const CMatrix gram = h.adjoint() * h;
  const double trace = gram.diagonal().real().sum();
  if (!(trace > 0.0)) throw DegenerateInputError("dominant_eigenvector: all-zero channel matrix");

  // Repeated squaring sharpens the spectral gap; the Rayleigh quotient and the
  // residual are always taken against the plain Gram matrix.
  CMatrix accel = gram / trace;
  for (int s = 0; s < options.squarings; ++s) {
    accel = accel * accel;
    accel /= accel.diagonal().real().sum();
  }

  const Eigen::Index n = gram.rows();
  CVector x = CVector::Constant(n, Complex(1.0 / std::sqrt(static_cast<double>(n)), 0.0));
  CVector y = accel * x;
  if (y.norm() <= 1e-12) {
    x(0) += 1e-6;
    x.normalize();
    y = accel * x;
  }
  if (y.norm() <= 1e-12) {
    Eigen::Index pivot = 0;
    accel.diagonal().real().maxCoeff(&pivot);
    y = accel.col(pivot);
  }

  EigenPair out;
  double lambda = 0.0;
  double residual = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const CVector next = y / y.norm();
    const double step = (next - x).norm();
    x = next;
    const CVector gx = gram * x;
    const double rq = x.dot(gx).real();
    residual = (gx - rq * x).norm();
    const bool settled = std::abs(rq - lambda) <= options.rq_tolerance * rq && step <= 1e-10;
    lambda = rq;
    out.iterations = it;
    if (settled && residual <= 1e-8 * lambda) break;
    y = accel * x;
  }
  if (!(residual <= 1e-8 * lambda)) {
    throw ConvergenceError("dominant_eigenvector: no convergence after " +
                               std::to_string(options.max_iterations) + " iterations, residual " +
                               std::to_string(residual),
                           residual);
  }
  canonicalize_phase(x);
  out.w = std::move(x);
  out.lambda = lambda;
  return out;
}

CsiSample extract_csi(const FreqChannel& hf) {
  if (hf.blocks.empty()) throw ContractError("extract_csi: channel has no subbands");
  const Eigen::Index n_tx = hf.blocks.front().cols();
  CsiSample sample{CMatrix(n_tx, static_cast<Eigen::Index>(hf.blocks.size()))};
  for (std::size_t k = 0; k < hf.blocks.size(); ++k) {
    if (hf.blocks[k].cols() != n_tx) throw ContractError("extract_csi: inconsistent block widths");
    try {
      sample.w.col(static_cast<Eigen::Index>(k)) = dominant_eigenvector(hf.blocks[k]).w;
    } catch (const DegenerateInputError& e) {
      throw DegenerateInputError("subband " + std::to_string(k) + ": " + e.what());
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("subband " + std::to_string(k) + ": " + e.what(), e.residual());
    }
  }
  return sample;
}

std::size_t Dataset::train_count() const {
  return static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(size())));
}

std::vector<std::size_t> Dataset::permutation() const {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train_fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed(split_seed));
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

std::vector<std::size_t> Dataset::train_indices() const {
  auto idx = permutation();
  idx.resize(train_count());
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::size_t> Dataset::validation_indices() const {
  auto idx = permutation();
  idx.erase(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(train_count()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Dataset build_dataset(const ChannelParams& params, std::size_t n_samples,
                      std::uint64_t master_seed) {
  if (n_samples == 0) throw ConfigError("build_dataset: n_samples must be >= 1");
  params.validate();
  Dataset ds;
  ds.samples.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    ds.samples.push_back(extract_csi(synth_freq_channel(params, master_seed, i)));
  }
  return ds;
}

void write_dataset(std::ostream& os, const std::vector<CsiSample>& samples) {
  const std::uint32_t n_tx = samples.empty() ? 0 : samples.front().n_tx();
  const std::uint32_t n_sb = samples.empty() ? 0 : samples.front().n_subband();
  binio::put_magic(os, "EVCS");
  binio::put_le<std::uint32_t>(os, kDatasetVersion);
  binio::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(samples.size()));
  binio::put_le<std::uint32_t>(os, n_tx);
  binio::put_le<std::uint32_t>(os, n_sb);
  for (const auto& s : samples) {
    if (static_cast<std::uint32_t>(s.n_tx()) != n_tx ||
        static_cast<std::uint32_t>(s.n_subband()) != n_sb) {
      throw ContractError("write_dataset: samples have inconsistent shapes");
    }
    for (int k = 0; k < s.n_subband(); ++k) {
      for (int n = 0; n < s.n_tx(); ++n) {
        binio::put_f32(os, static_cast<float>(s.w(n, k).real()));
        binio::put_f32(os, static_cast<float>(s.w(n, k).imag()));
      }
    }
  }
  if (!os) throw IoError("write_dataset: stream write failed");
}

DatasetHeader read_dataset_header(std::istream& is) {
  binio::expect_magic(is, "EVCS");
  DatasetHeader h;
  h.version = binio::get_le<std::uint32_t>(is);
  if (h.version != kDatasetVersion) {
    throw IoError("unsupported EVCS version " + std::to_string(h.version));
  }
  h.n_samples = binio::get_le<std::uint32_t>(is);
  h.n_tx = binio::get_le<std::uint32_t>(is);
  h.n_subband = binio::get_le<std::uint32_t>(is);
  return h;
}

std::vector<CsiSample> read_dataset(std::istream& is) {
  const DatasetHeader h = read_dataset_header(is);
  std::vector<CsiSample> samples(h.n_samples);
  for (auto& s : samples) {
    s.w.resize(h.n_tx, h.n_subband);
    for (std::uint32_t k = 0; k < h.n_subband; ++k) {
      for (std::uint32_t n = 0; n < h.n_tx; ++n) {
        const float re = binio::get_f32(is);
        const float im = binio::get_f32(is);
        s.w(n, k) = Complex(re, im);
      }
    }
  }
  return samples;
}

void save_dataset(const std::filesystem::path& path, const std::vector<CsiSample>& samples) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_dataset(os, samples);
}

std::vector<CsiSample> load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return read_dataset(is);
}

}  // namespace evcsi
