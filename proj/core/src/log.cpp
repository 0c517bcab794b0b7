#include "psim/log.hpp"

#include <cstdlib>
#include <iostream>

namespace psim {

namespace {
LogLevel g_level = LogLevel::info;
}

LogLevel log_level_from_env() {
    const char* env = std::getenv("PSIM_LOG_LEVEL");
    if (env == nullptr) return LogLevel::info;
    const std::string v{env};
    if (v == "error") return LogLevel::error;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::info;
}

void set_log_level(LogLevel level) { g_level = level; }

LogLevel log_level() { return g_level; }

void log_msg(LogLevel level, const std::string& message) {
    if (static_cast<int>(level) > static_cast<int>(g_level)) return;
    const char* tag = level == LogLevel::error ? "error" : level == LogLevel::info ? "info" : "debug";
    std::cerr << "psim [" << tag << "] " << message << "\n";
}

}  // namespace psim
