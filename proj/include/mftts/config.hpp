// Copyright 2026 The mftts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Flat `key = value` configuration text. `#` starts a comment. Every key a
// consumer reads is marked used; `require_all_used` turns leftovers into a
// ConfigError so typos never pass silently.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace mftts {

class ConfigMap {
 public:
  static ConfigMap parse(std::string_view text);
  static ConfigMap load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  // Each getter returns `fallback` when the key is absent.
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  bool get_bool(const std::string& key, bool fallback);

  void require_all_used() const;
  const std::map<std::string, std::string>& values() const { return values_; }

  // Deterministic rendering, one `key = value` per line in key order.
  std::string to_text() const;

 private:
  const std::string* find(const std::string& key);

  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

// Shortest decimal form that reads back to the same double.
std::string format_double(double v);

}  // namespace mftts
