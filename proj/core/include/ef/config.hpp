// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat `key = value` configuration text. Blank lines and text after `#` are
// ignored; keys may repeat only if identical. Lists are comma separated.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ef {

class ConfigFile {
 public:
  /// Throws ConfigError on a malformed line or a conflicting duplicate key.
  static ConfigFile parse(std::string_view text, std::string source = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  [[nodiscard]] bool contains(const std::string& key) const;

  // Typed getters mark the key as used and throw ConfigError on bad values.
  [[nodiscard]] std::optional<std::string> get_string(const std::string& key) const;
  [[nodiscard]] std::optional<double> get_double(const std::string& key) const;
  [[nodiscard]] std::optional<std::uint64_t> get_uint(const std::string& key) const;
  [[nodiscard]] std::optional<bool> get_bool(const std::string& key) const;
  [[nodiscard]] std::optional<std::vector<std::string>> get_list(const std::string& key) const;
  [[nodiscard]] std::optional<std::vector<double>> get_double_list(const std::string& key) const;
  [[nodiscard]] std::optional<std::vector<std::uint64_t>> get_uint_list(const std::string& key) const;

  std::string get_string(const std::string& key, std::string fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Keys never read through a getter.
  [[nodiscard]] std::vector<std::string> unused_keys() const;
  /// Canonical `key = value` lines in key order, leaving out `exclude`.
  [[nodiscard]] std::string canonical(const std::set<std::string>& exclude = {}) const;
  [[nodiscard]] const std::string& source() const noexcept { return source_; }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string source_;
};

/// 64-bit FNV-1a, as 16 hex digits.
[[nodiscard]] std::string fnv1a_hex(std::string_view text);

}  // namespace ef
