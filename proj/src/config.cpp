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

#include "evcsi/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evcsi/errors.hpp"

namespace evcsi {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ", ";
    out += s;
  }
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& is, const std::string& source) {
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected \"key = value\"");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.has(key)) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key \"" + key + "\"");
    }
    cfg.entries_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  return parse(is, path.string());
}

void KeyValueConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

void KeyValueConfig::set(const std::string& key, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  entries_[key] = buf;
}

void KeyValueConfig::set(const std::string& key, std::int64_t value) {
  entries_[key] = std::to_string(value);
}

void KeyValueConfig::set(const std::string& key, std::uint64_t value) {
  entries_[key] = std::to_string(value);
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(source_ + ": missing key \"" + key + "\"");
  return it->second;
}

namespace {

template <typename T>
T parse_number(const std::string& source, const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(source + ": key \"" + key + "\" has malformed value \"" + text + "\"");
  }
  return value;
}

}  // namespace

int KeyValueConfig::get_int(const std::string& key) const {
  return parse_number<int>(source_, key, get(key));
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key) const {
  return parse_number<std::uint64_t>(source_, key, get(key));
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string& text = get(key);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) {
    throw ConfigError(source_ + ": key \"" + key + "\" has malformed value \"" + text + "\"");
  }
  return v;
}

bool KeyValueConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError(source_ + ": key \"" + key + "\" expects a boolean, got \"" + v + "\"");
}

std::vector<std::string> KeyValueConfig::unknown_keys(const std::set<std::string>& allowed) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_) {
    if (!allowed.count(k)) out.push_back(k);
  }
  return out;
}

std::vector<std::string> KeyValueConfig::missing_keys(const std::set<std::string>& required) const {
  std::vector<std::string> out;
  for (const auto& k : required) {
    if (!has(k)) out.push_back(k);
  }
  return out;
}

void KeyValueConfig::require_keys(const std::set<std::string>& allowed,
                                  const std::set<std::string>& required) const {
  const auto unknown = unknown_keys(allowed);
  const auto missing = missing_keys(required);
  if (unknown.empty() && missing.empty()) return;
  std::string msg = source_ + ":";
  if (!unknown.empty()) msg += " unknown keys: " + join(unknown) + ";";
  if (!missing.empty()) msg += " missing keys: " + join(missing) + ";";
  msg.pop_back();
  throw ConfigError(msg);
}

std::string KeyValueConfig::to_string() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
  return os.str();
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
  write_file_atomic(path, to_string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os << contents;
    if (!os) throw IoError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace evcsi
