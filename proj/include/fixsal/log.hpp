#pragma once

#include <string>

namespace fixsal {

enum class LogLevel { kQuiet = 0, kWarn = 1, kInfo = 2 };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_warn(const std::string& msg);
void log_info(const std::string& msg);

}  // namespace fixsal
