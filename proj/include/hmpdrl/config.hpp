#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "hmpdrl/error.hpp"

namespace hmpdrl {

/// Shortest round-trip decimal representation of a double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
  double v = 0.0;
  // from_chars rejects a leading '+'
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    if (text == "inf") return std::numeric_limits<double>::infinity();
    throw FormatError("cannot parse '" + std::string(text) + "' as a number for " + std::string(what));
  }
  return v;
}

inline std::int64_t parse_int(std::string_view text, std::string_view what) {
  std::int64_t v = 0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw FormatError("cannot parse '" + std::string(text) + "' as an integer for " + std::string(what));
  return v;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Flat `key = value` store. Lines starting with '#' are comments.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, std::string_view source = "<stream>") {
    KeyValueConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": expected 'key = value'");
      std::string key = trim(std::string_view(t).substr(0, eq));
      std::string value = trim(std::string_view(t).substr(eq + 1));
      if (key.empty())
        throw ConfigError(std::string(source) + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = format_double(value); }

  /// Entries of `other` take precedence.
  void merge(const KeyValueConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_double(it->second, key);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      return parse_int(it->second, key);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const auto& v = it->second;
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "' expects a boolean, got '" + v + "'");
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string dump() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    return out.str();
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace hmpdrl
