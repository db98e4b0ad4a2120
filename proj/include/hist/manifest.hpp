// SPDX-License-Identifier: Apache-2.0
//
// Run manifests: config snapshot + seed + FNV-1a content hash of every
// artifact a run produced. Identical (config, seed) runs produce identical
// manifests.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hist/common.hpp"
#include "hist/config.hpp"

namespace hist {

inline uint64_t fnv1a_bytes(const char* data, size_t n, uint64_t h) {
  for (size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash missing file: " + path);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a_bytes(buf, static_cast<size_t>(in.gcount()), h);
  return h;
}

class Manifest {
 public:
  Manifest(ConfigFile config, uint64_t seed)
      : config_(std::move(config)), seed_(seed) {}

  // Record an artifact; 'name' is the path relative to the output root.
  void add(const std::string& name, const std::string& path) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a_file(path)));
    entries_.push_back({name, buf});
  }

  void write(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << "[run]\nseed = " << seed_ << "\n";
    out << "[config]\n" << config_.snapshot();
    out << "[artifacts]\n";
    auto sorted = entries_;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [name, hash] : sorted) out << hash << "  " << name << "\n";
    if (!out) throw IoError("short write on manifest: " + path);
  }

 private:
  ConfigFile config_;
  uint64_t seed_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace hist
