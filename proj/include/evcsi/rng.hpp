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
#include <random>

namespace evcsi {

// Counter-based seed mixer (splitmix64 finalizer). Substreams derived from
// (master_seed, index, tag) are independent of generation order.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index,
                                       std::uint64_t tag = 0) noexcept {
  return mix_seed(mix_seed(mix_seed(master) ^ index) ^ (tag * 0xD1B54A32D192ED03ULL));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t index, std::uint64_t tag = 0) {
  return Rng(substream_seed(master, index, tag));
}

}  // namespace evcsi
