// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "camlab/core/error.hpp"

namespace camlab {

/// Flat `dotted.key = value` configuration. A Config is created from a set of
/// defaults; every later assignment must name a key that already exists, so
/// typos are rejected instead of silently ignored.
class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> defaults) : values_(std::move(defaults)) {}

  bool has(std::string_view key) const { return values_.find(std::string(key)) != values_.end(); }

  void set(std::string_view key, std::string value) {
    auto it = values_.find(std::string(key));
    if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    it->second = std::move(value);
  }

  /// Applies `key=value`.
  void apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
    set(trim(assignment.substr(0, eq)), std::string(trim(assignment.substr(eq + 1))));
  }

  void merge_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto body = trim(std::string_view(line).substr(0, line.find('#')));
      if (body.empty()) continue;
      try {
        apply_override(body);
      } catch (const ConfigError& e) {
        throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str());
  }

  const std::string& str(std::string_view key) const {
    auto it = values_.find(std::string(key));
    if (it == values_.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    return it->second;
  }

  long long integer(std::string_view key) const {
    const auto& s = str(key);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw ConfigError("config key '" + std::string(key) + "' expects an integer, got '" + s + "'");
    return v;
  }

  double real(std::string_view key) const {
    const auto& s = str(key);
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + std::string(key) + "' expects a number, got '" + s + "'");
    }
  }

  bool boolean(std::string_view key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key '" + std::string(key) + "' expects a boolean, got '" + s + "'");
  }

  /// Resolved snapshot, one key per line in sorted order.
  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace camlab
