#pragma once

#include <string>

namespace psim {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Reads PSIM_LOG_LEVEL (error|info|debug); defaults to info.
LogLevel log_level_from_env();

void set_log_level(LogLevel level);
LogLevel log_level();

/// Diagnostic logging to stderr. Not the simulation event log.
void log_msg(LogLevel level, const std::string& message);

}  // namespace psim
