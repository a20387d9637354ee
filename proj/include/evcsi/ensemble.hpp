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
#include <filesystem>
#include <string>
#include <vector>

#include "evcsi/channelgen.hpp"
#include "evcsi/metrics.hpp"
#include "evcsi/model.hpp"
#include "evcsi/quantizer.hpp"

namespace evcsi {

struct EnsembleMember {
  ModelConfig cfg;
  ModelWeights weights;
  std::string source;  // archive path, informational
};

// V members sharing a total budget of M bits: ceil(log2 V) index bits
// followed by an M_s-bit member payload.
struct Ensemble {
  int bits_total = 0;
  std::vector<EnsembleMember> members;

  int index_bits() const;
  int payload_bits() const { return bits_total - index_bits(); }
  // Throws ConfigError unless every member emits exactly payload_bits().
  void validate() const;
};

int index_bits_for(std::size_t n_members);

struct EnsembleChoice {
  Bitstream stream;
  std::size_t member = 0;
  std::vector<double> member_sgcs;  // local SGCS of every member
};

// Runs every member's encode/decode locally and keeps the best (lowest index
// on ties).
EnsembleChoice ensemble_select(const CsiSample& w, const Ensemble& ens);
Bitstream ensemble_encode(const CsiSample& w, const Ensemble& ens);
// Throws ProtocolError on a wrong length or an index >= V.
std::size_t ensemble_member_index(const Bitstream& s, const Ensemble& ens);
CsiSample ensemble_decode(const Bitstream& s, const Ensemble& ens);

struct EnsembleEval {
  std::vector<Bitstream> streams;
  std::vector<std::size_t> choice;
  std::vector<std::vector<double>> member_sgcs;  // [member][sample]
  std::vector<double> ensemble_sgcs;             // per sample, from ensemble_decode
  EvalReport report;
};

// Selection over a sample set; ensemble SGCS is measured on the decoded
// joint bitstreams.
EnsembleEval ensemble_evaluate(std::span<const CsiSample> samples, const Ensemble& ens);

// Manifest: "bits_total = M" and one "member = <path>" line per member, in
// index order. Relative paths resolve against the manifest's directory.
struct EnsembleManifest {
  int bits_total = 0;
  std::vector<std::filesystem::path> members;
};

EnsembleManifest load_ensemble_manifest(const std::filesystem::path& path);
void save_ensemble_manifest(const std::filesystem::path& path, const EnsembleManifest& m);
Ensemble load_ensemble(const std::filesystem::path& manifest_path);

}  // namespace evcsi
