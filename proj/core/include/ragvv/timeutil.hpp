#pragma once

#include <chrono>
#include <string>

namespace ragvv {

/// "2025-05-01T12:34:56.789Z"
std::string iso8601_utc(std::chrono::system_clock::time_point t);

/// Floor of `seconds` rendered as H:MM:SS (hours unbounded).
std::string format_hms(double seconds);

}  // namespace ragvv
