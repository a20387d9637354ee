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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "evcsi/config.hpp"
#include "evcsi/model.hpp"

namespace evcsi {

inline constexpr const char* kToolVersion = "evcsi 1.0.0";

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitIo = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitDimension = 4;

// Written as "<artifact>.manifest" next to every produced artifact.
struct RunManifest {
  std::string command;
  std::string argv;  // full command line
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> seeds;
  std::vector<std::pair<std::string, std::string>> artifacts;
  KeyValueConfig resolved;  // effective configuration, stored under "config."

  KeyValueConfig to_kv() const;
  void save(const std::filesystem::path& artifact) const;
};

std::filesystem::path manifest_path(const std::filesystem::path& artifact);

// Run configs: ModelConfig and TrainConfig keys, "seed" required, model keys
// defaulting to the desk configuration.
ModelConfig model_from_run_config(const KeyValueConfig& kv);
void check_run_config(const KeyValueConfig& kv);

struct ComplexityRow {
  int bits_total = 0;
  ComplexityCount count;
  // Reference values from the published table.
  double ref_encoder_params = 0.0;
  double ref_decoder_params = 0.0;
  double ref_encoder_flops = 0.0;
  double ref_decoder_flops = 0.0;
};

ModelConfig published_model_config(int bits_total);
std::vector<ComplexityRow> published_complexity_rows();
double relative_deviation(double value, double reference);
// (max - min) / min over the encoder and decoder counts of the rows.
double parameter_spread(const std::vector<ComplexityRow>& rows);

inline constexpr double kParamTolerance = 0.02;
inline constexpr double kFlopTolerance = 0.15;
inline constexpr double kSpreadTolerance = 0.005;

// Entry point of the `evcsi` tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evcsi
