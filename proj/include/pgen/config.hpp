#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "pgen/error.hpp"

namespace pgen {

// UTF-8 `key=value` configuration lines. Blank lines and lines starting
// with '#' are ignored; later assignments override earlier ones. CLI flags
// are merged on top with the same override rule.

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline KeyValues parse_config_text(const std::string& text, const std::string& origin = "config") {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ParseError(origin + " line " + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = detail::trim(t.substr(0, eq));
    std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(origin + " line " + std::to_string(lineno) + ": empty key");
    }
    out[key] = value;
  }
  return out;
}

inline KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

inline void merge_config(KeyValues& base, const KeyValues& overrides) {
  for (const auto& [k, v] : overrides) base[k] = v;
}

inline std::string config_get(const KeyValues& kv, const std::string& key,
                              const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

inline std::uint64_t config_get_u64(const KeyValues& kv, const std::string& key,
                                    std::uint64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + it->second + "'");
  }
}

inline double config_get_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + it->second + "'");
  }
}

inline bool config_get_bool(const KeyValues& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace pgen
