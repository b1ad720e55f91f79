#pragma once

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>

namespace molmeta::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

// Threshold comes from MOLMETA_LOG (debug|info|warn|error|off); default warn.
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("MOLMETA_LOG");
    if (env == nullptr) return Level::kWarn;
    const std::string_view v(env);
    if (v == "debug") return Level::kDebug;
    if (v == "info") return Level::kInfo;
    if (v == "error") return Level::kError;
    if (v == "off") return Level::kOff;
    return Level::kWarn;
  }();
  return level;
}

inline void write(Level level, std::string_view message) {
  if (level < threshold()) return;
  static std::mutex mu;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << "[molmeta " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

template <typename... Args>
void emit(Level level, const Args&... args) {
  if (level < threshold()) return;
  std::ostringstream oss;
  (oss << ... << args);
  write(level, oss.str());
}

template <typename... Args>
void debug(const Args&... args) { emit(Level::kDebug, args...); }
template <typename... Args>
void info(const Args&... args) { emit(Level::kInfo, args...); }
template <typename... Args>
void warn(const Args&... args) { emit(Level::kWarn, args...); }

}  // namespace molmeta::log
