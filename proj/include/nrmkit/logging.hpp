#pragma once

#include <cstdio>
#include <cstdlib>
#include <string_view>

namespace nrmkit::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Threshold read once from NRMKIT_LOG; defaults to warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("NRMKIT_LOG");
    if (env == nullptr) return Level::warn;
    std::string_view v{env};
    if (v == "error") return Level::error;
    if (v == "info") return Level::info;
    if (v == "debug") return Level::debug;
    return Level::warn;
  }();
  return level;
}

inline void write(Level level, std::string_view msg) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  static constexpr const char* names[] = {"error", "warn", "info", "debug"};
  std::fprintf(stderr, "[nrmkit %s] %.*s\n", names[static_cast<int>(level)],
               static_cast<int>(msg.size()), msg.data());
}

inline void error(std::string_view m) { write(Level::error, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void debug(std::string_view m) { write(Level::debug, m); }

}  // namespace nrmkit::log
