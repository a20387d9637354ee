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
#include <map>
#include <set>
#include <string>
#include <vector>

namespace evcsi {

// Flat "key = value" text format used for run configs, weight sidecars and
// manifests. '#' starts a comment; blank lines are ignored.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is, const std::string& source = "<stream>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(const std::string& key, std::uint64_t value);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Keys present but not in `allowed`.
  std::vector<std::string> unknown_keys(const std::set<std::string>& allowed) const;
  std::vector<std::string> missing_keys(const std::set<std::string>& required) const;
  // Throws ConfigError listing every offending key.
  void require_keys(const std::set<std::string>& allowed, const std::set<std::string>& required) const;

  std::string to_string() const;
  // Writes to a temporary sibling and renames it into place.
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
  std::string source_;
};

// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace evcsi
