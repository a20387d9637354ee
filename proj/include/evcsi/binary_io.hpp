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

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "evcsi/errors.hpp"

// Little-endian scalar encoding shared by the on-disk formats.
namespace evcsi::binio {

template <typename U>
void put_le(std::ostream& os, U value) {
  static_assert(std::is_unsigned_v<U>);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
  os.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw IoError("unexpected end of file");
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return value;
}

inline void put_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }
inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_le<std::uint32_t>(is)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

inline void put_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw IoError("bad magic, expected \"" + std::string(magic) + "\"");
  }
}

}  // namespace evcsi::binio
