#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace sfminv {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

// Log level comes from the SFMINV_LOG environment variable only.
inline LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("SFMINV_LOG");
    if (!env) return LogLevel::warn;
    if (!std::strcmp(env, "debug")) return LogLevel::debug;
    if (!std::strcmp(env, "info")) return LogLevel::info;
    if (!std::strcmp(env, "error")) return LogLevel::error;
    return LogLevel::warn;
  }();
  return level;
}

inline void log_msg(LogLevel lv, const std::string& msg) {
  if (lv < log_level()) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::fprintf(stderr, "[%s] %s\n", names[int(lv)], msg.c_str());
}

inline void log_debug(const std::string& m) { log_msg(LogLevel::debug, m); }
inline void log_info(const std::string& m) { log_msg(LogLevel::info, m); }
inline void log_warn(const std::string& m) { log_msg(LogLevel::warn, m); }
inline void log_error(const std::string& m) { log_msg(LogLevel::error, m); }

}  // namespace sfminv
