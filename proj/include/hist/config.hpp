// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hist/common.hpp"

namespace hist {

// Flat "[section]\nkey = value" config format. Keys are addressed as
// "section.key"; values keep their literal text until typed access.
class ConfigFile {
 public:
  ConfigFile() = default;

  static ConfigFile parse_text(const std::string& text) {
    ConfigFile cfg;
    std::stringstream ss(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(ss, line)) {
      ++lineno;
      std::string s = trim(line);
      if (s.empty() || s[0] == '#' || s[0] == ';') continue;
      if (s.front() == '[') {
        if (s.back() != ']')
          throw InvalidConfigError("config line " + std::to_string(lineno) +
                                   ": malformed section header");
        section = trim(s.substr(1, s.size() - 2));
        continue;
      }
      auto eq = s.find('=');
      if (eq == std::string::npos)
        throw InvalidConfigError("config line " + std::to_string(lineno) +
                                 ": expected key = value");
      std::string key = trim(s.substr(0, eq));
      std::string val = trim(s.substr(eq + 1));
      cfg.values_[section.empty() ? key : section + "." + key] = val;
    }
    return cfg;
  }

  static ConfigFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& val) {
    values_[key] = val;
  }

  std::string get_str(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
      throw InvalidConfigError("config key " + key + ": not a number: " +
                               it->second);
    return v;
  }

  long long get_int(const std::string& key, long long dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    char* end = nullptr;
    long long v = std::strtoll(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
      throw InvalidConfigError("config key " + key + ": not an integer: " +
                               it->second);
    return v;
  }

  bool get_bool(const std::string& key, bool dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw InvalidConfigError("config key " + key + ": not a bool: " +
                             it->second);
  }

  // Serialized snapshot with sorted keys, for run manifests.
  std::string snapshot() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace hist
