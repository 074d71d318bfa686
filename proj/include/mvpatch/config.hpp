// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mvpatch/error.hpp"

namespace mvpatch {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

/// Strict numeric parsing: the whole (trimmed) field must be consumed.
template <typename T>
std::optional<T> parse_number(const std::string& text) {
  const std::string s = trim(text);
  if (s.empty()) return std::nullopt;
  T value{};
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

/// Flat "key = value" configuration; '#' starts a comment line.  Keeps the
/// line number of every key for error messages.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& name) {
    KeyValueConfig cfg;
    cfg.name_ = name;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) fail(ErrorKind::ParseError, name + ":" + std::to_string(lineno) + ": expected key=value");
      const std::string key = trim(t.substr(0, eq));
      if (key.empty()) fail(ErrorKind::ParseError, name + ":" + std::to_string(lineno) + ": empty key");
      if (cfg.values_.contains(key)) {
        fail(ErrorKind::ParseError, name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      }
      cfg.values_[key] = {trim(t.substr(eq + 1)), lineno};
    }
    return cfg;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::MissingFile, path.string());
    return parse(in, path.string());
  }

  bool has(const std::string& key) const { return values_.contains(key); }

  std::optional<std::string> get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second.text;
  }

  template <typename T>
  std::optional<T> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    const auto v = parse_number<T>(it->second.text);
    if (!v) {
      fail(ErrorKind::ParseError, name_ + ":" + std::to_string(it->second.line) + ": key '" + key +
                                      "' has invalid value '" + it->second.text + "'");
    }
    return v;
  }

  /// Whitespace- or comma-separated list of numbers.
  template <typename T>
  std::optional<std::vector<T>> get_list(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string text = it->second.text;
    for (char& c : text) {
      if (c == ',') c = ' ';
    }
    std::istringstream ss(text);
    std::vector<T> out;
    std::string tok;
    while (ss >> tok) {
      const auto v = parse_number<T>(tok);
      if (!v) {
        fail(ErrorKind::ParseError, name_ + ":" + std::to_string(it->second.line) + ": key '" + key +
                                        "' has invalid list element '" + tok + "'");
      }
      out.push_back(*v);
    }
    return out;
  }

  int line_of(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? 0 : it->second.line;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> k;
    for (const auto& [key, _] : values_) k.push_back(key);
    return k;
  }

  const std::string& name() const { return name_; }

 private:
  struct Value {
    std::string text;
    int line = 0;
  };
  std::string name_;
  std::map<std::string, Value> values_;
};

}  // namespace mvpatch
