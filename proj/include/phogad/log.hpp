#pragma once

#include <cstdlib>
#include <iostream>
#include <string_view>

namespace phogad::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

// PHOGAD_LOG_LEVEL = debug | info | warn | error | off; default info.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("PHOGAD_LOG_LEVEL");
    const std::string_view v = env ? env : "info";
    if (v == "debug") return Level::debug;
    if (v == "warn") return Level::warn;
    if (v == "error") return Level::error;
    if (v == "off") return Level::off;
    return Level::info;
  }();
  return level;
}

template <class... Args>
void write(Level level, std::string_view tag, const Args&... args) {
  if (level < threshold()) return;
  std::cerr << "[phogad " << tag << "] ";
  (std::cerr << ... << args);
  std::cerr << '\n';
}

template <class... Args>
void debug(const Args&... args) { write(Level::debug, "debug", args...); }
template <class... Args>
void info(const Args&... args) { write(Level::info, "info", args...); }
template <class... Args>
void warn(const Args&... args) { write(Level::warn, "warn", args...); }
template <class... Args>
void error(const Args&... args) { write(Level::error, "error", args...); }

}  // namespace phogad::log
