// SPDX-License-Identifier: Apache-2.0
#include "ef/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ef/errors.hpp"

namespace ef {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' && c != '-') return false;
  }
  return true;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty() || text.front() == '+') return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = text.find(',');
    out.emplace_back(trim(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

ConfigFile ConfigFile::parse(std::string_view text, std::string source) {
  ConfigFile cfg;
  cfg.source_ = std::move(source);
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = cfg.source_ + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!valid_key(key)) throw ConfigError(where + ": invalid key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    const auto [it, inserted] = cfg.values_.emplace(key, value);
    if (!inserted && it->second != value) throw ConfigError(where + ": conflicting values for '" + key + "'");
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void ConfigFile::set(const std::string& key, std::string value) {
  if (!valid_key(key)) throw ConfigError("invalid key '" + key + "'");
  values_[key] = std::move(value);
}

bool ConfigFile::contains(const std::string& key) const { return values_.count(key) != 0; }

void ConfigFile::fail(const std::string& key, const std::string& message) const {
  throw ConfigError(source_ + ": " + key + ": " + message);
}

std::optional<std::string> ConfigFile::get_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::optional<double> ConfigFile::get_double(const std::string& key) const {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  double v = 0.0;
  if (!parse_number(*s, v) || !std::isfinite(v)) fail(key, "expected a number, got '" + *s + "'");
  return v;
}

std::optional<std::uint64_t> ConfigFile::get_uint(const std::string& key) const {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  std::uint64_t v = 0;
  if (!parse_number(*s, v)) fail(key, "expected a non-negative integer, got '" + *s + "'");
  return v;
}

std::optional<bool> ConfigFile::get_bool(const std::string& key) const {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1" || *s == "yes") return true;
  if (*s == "false" || *s == "0" || *s == "no") return false;
  fail(key, "expected true or false, got '" + *s + "'");
}

std::optional<std::vector<std::string>> ConfigFile::get_list(const std::string& key) const {
  const auto s = get_string(key);
  if (!s) return std::nullopt;
  auto items = split_list(*s);
  for (const auto& item : items) {
    if (item.empty()) fail(key, "empty list element");
  }
  return items;
}

std::optional<std::vector<double>> ConfigFile::get_double_list(const std::string& key) const {
  const auto items = get_list(key);
  if (!items) return std::nullopt;
  std::vector<double> out;
  for (const auto& item : *items) {
    double v = 0.0;
    if (!parse_number(std::string_view(item), v) || !std::isfinite(v)) fail(key, "expected numbers, got '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::optional<std::vector<std::uint64_t>> ConfigFile::get_uint_list(const std::string& key) const {
  const auto items = get_list(key);
  if (!items) return std::nullopt;
  std::vector<std::uint64_t> out;
  for (const auto& item : *items) {
    std::uint64_t v = 0;
    if (!parse_number(std::string_view(item), v)) fail(key, "expected non-negative integers, got '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string ConfigFile::get_string(const std::string& key, std::string fallback) const {
  return get_string(key).value_or(std::move(fallback));
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  return get_double(key).value_or(fallback);
}

std::uint64_t ConfigFile::get_uint(const std::string& key, std::uint64_t fallback) const {
  return get_uint(key).value_or(fallback);
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  return get_bool(key).value_or(fallback);
}

std::vector<std::string> ConfigFile::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (used_.count(key) == 0) out.push_back(key);
  }
  return out;
}

std::string ConfigFile::canonical(const std::set<std::string>& exclude) const {
  std::string out;
  for (const auto& [key, value] : values_) {
    if (exclude.count(key) == 0) out += key + " = " + value + "\n";
  }
  return out;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ef
