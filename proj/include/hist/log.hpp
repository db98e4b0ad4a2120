// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace hist {

// Verbosity from the HIST_LOG env var: 0 = errors only (default),
// 1 = progress, 2 = debug.
inline int log_level() {
  static int level = [] {
    const char* v = std::getenv("HIST_LOG");
    return v ? std::atoi(v) : 0;
  }();
  return level;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::fprintf(stderr, "[hist] %s\n", msg.c_str());
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::fprintf(stderr, "[hist:debug] %s\n", msg.c_str());
}

}  // namespace hist
