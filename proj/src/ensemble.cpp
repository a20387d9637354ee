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

#include "evcsi/ensemble.hpp"

#include <fstream>
#include <sstream>

#include "evcsi/errors.hpp"

namespace evcsi {

int index_bits_for(std::size_t n_members) {
  if (n_members == 0) throw ConfigError("ensemble: no members");
  int b = 0;
  while ((std::size_t{1} << b) < n_members) ++b;
  return b;
}

int Ensemble::index_bits() const { return index_bits_for(members.size()); }

void Ensemble::validate() const {
  const int ms = payload_bits();
  if (ms < 1) throw ConfigError("ensemble: no payload bits left after the member index");
  for (std::size_t j = 0; j < members.size(); ++j) {
    const ModelConfig& c = members[j].cfg;
    if (c.bits_total != ms) {
      throw ConfigError("ensemble: member " + std::to_string(j) + " emits " + std::to_string(c.bits_total) +
                        " bits, payload width is " + std::to_string(ms));
    }
    if (ms < c.bits_per_symbol || ms % c.bits_per_symbol != 0) {
      throw ConfigError("ensemble: payload width " + std::to_string(ms) + " not divisible by B=" +
                        std::to_string(c.bits_per_symbol));
    }
    if (c.n_tx != members[0].cfg.n_tx || c.n_subband != members[0].cfg.n_subband) {
      throw ConfigError("ensemble: members disagree on the CSI shape");
    }
    check_weights(members[j].weights, c);
  }
}

namespace {

Bitstream index_prefix(std::size_t j, int bits) {
  std::vector<std::uint8_t> b(bits);
  for (int i = 0; i < bits; ++i) b[i] = static_cast<std::uint8_t>((j >> (bits - 1 - i)) & 1u);
  return Bitstream(std::move(b));
}

}  // namespace

EnsembleChoice ensemble_select(const CsiSample& w, const Ensemble& ens) {
  ens.validate();
  EnsembleChoice c;
  Bitstream best;
  double best_sgcs = -1.0;
  for (std::size_t j = 0; j < ens.members.size(); ++j) {
    const auto& m = ens.members[j];
    const Bitstream payload = encode(w, m.weights, m.cfg);
    const double s = sample_sgcs(w, decode(payload, m.weights, m.cfg));
    c.member_sgcs.push_back(s);
    if (s > best_sgcs) {
      best_sgcs = s;
      best = payload;
      c.member = j;
    }
  }
  c.stream = index_prefix(c.member, ens.index_bits()).concat(best);
  return c;
}

Bitstream ensemble_encode(const CsiSample& w, const Ensemble& ens) { return ensemble_select(w, ens).stream; }

std::size_t ensemble_member_index(const Bitstream& s, const Ensemble& ens) {
  if (s.size() != static_cast<std::size_t>(ens.bits_total)) {
    throw ProtocolError("ensemble: stream has " + std::to_string(s.size()) + " bits, expected " +
                        std::to_string(ens.bits_total));
  }
  std::size_t j = 0;
  for (int i = 0; i < ens.index_bits(); ++i) j = (j << 1) | (s.bit(i) ? 1u : 0u);
  if (j >= ens.members.size()) {
    throw ProtocolError("ensemble: member index " + std::to_string(j) + " >= V=" + std::to_string(ens.members.size()));
  }
  return j;
}

CsiSample ensemble_decode(const Bitstream& s, const Ensemble& ens) {
  const std::size_t j = ensemble_member_index(s, ens);
  const auto& m = ens.members[j];
  return decode(s.sub(ens.index_bits(), ens.payload_bits()), m.weights, m.cfg);
}

EnsembleEval ensemble_evaluate(std::span<const CsiSample> samples, const Ensemble& ens) {
  ens.validate();
  // Per-sample calls throughout, so selection and receiver see identical numerics.
  EnsembleEval ev;
  ev.member_sgcs.assign(ens.members.size(), {});
  std::vector<CsiSample> out;
  out.reserve(samples.size());
  for (const auto& w : samples) {
    EnsembleChoice c = ensemble_select(w, ens);
    for (std::size_t j = 0; j < c.member_sgcs.size(); ++j) ev.member_sgcs[j].push_back(c.member_sgcs[j]);
    out.push_back(ensemble_decode(c.stream, ens));
    ev.ensemble_sgcs.push_back(sample_sgcs(w, out.back()));
    ev.choice.push_back(c.member);
    ev.streams.push_back(std::move(c.stream));
  }
  ev.report = evaluate(samples, out);
  return ev;
}

EnsembleManifest load_ensemble_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open ensemble manifest " + path.string());
  EnsembleManifest m;
  bool have_bits = false;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "bits_total") {
      try {
        m.bits_total = std::stoi(value);
      } catch (const std::exception&) {
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad bits_total");
      }
      have_bits = true;
    } else if (key == "member") {
      std::filesystem::path p(value);
      if (p.is_relative()) p = path.parent_path() / p;
      m.members.push_back(p);
    } else {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!have_bits) throw ConfigError(path.string() + ": missing bits_total");
  if (m.members.empty()) throw ConfigError(path.string() + ": no members");
  return m;
}

void save_ensemble_manifest(const std::filesystem::path& path, const EnsembleManifest& m) {
  std::ostringstream os;
  os << "bits_total = " << m.bits_total << '\n';
  for (const auto& p : m.members) os << "member = " << p.string() << '\n';
  write_file_atomic(path, os.str());
}

Ensemble load_ensemble(const std::filesystem::path& manifest_path) {
  const EnsembleManifest m = load_ensemble_manifest(manifest_path);
  Ensemble ens;
  ens.bits_total = m.bits_total;
  for (const auto& p : m.members) {
    LoadedModel lm = load_model(p);
    ens.members.push_back({lm.cfg, std::move(lm.weights), p.string()});
  }
  ens.validate();
  return ens;
}

}  // namespace evcsi
