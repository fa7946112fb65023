#pragma once
// Library-wide logger. Verbosity comes from the CEM_LOG environment variable
// (error, warn, info, debug); default is warn.

#include <cstdlib>
#include <memory>
#include <string_view>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace cemnet {

inline spdlog::level::level_enum level_from_env() {
  const char* raw = std::getenv("CEM_LOG");
  if (raw == nullptr) return spdlog::level::warn;
  std::string_view v{raw};
  if (v == "error") return spdlog::level::err;
  if (v == "warn") return spdlog::level::warn;
  if (v == "info") return spdlog::level::info;
  if (v == "debug") return spdlog::level::debug;
  return spdlog::level::warn;
}

inline spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::get("cemnet");
    if (!l) l = spdlog::stderr_color_mt("cemnet");
    l->set_level(level_from_env());
    l->set_pattern("[%l] %v");
    return l;
  }();
  return *logger;
}

}  // namespace cemnet
