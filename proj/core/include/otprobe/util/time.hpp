#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace otprobe::util {

/// "2024-01-02T03:04:05.123Z"
std::string to_iso8601(std::chrono::system_clock::time_point tp);
std::string iso8601_now();
/// Accepts the form produced by to_iso8601, with or without milliseconds.
std::optional<std::chrono::system_clock::time_point> parse_iso8601(std::string_view text);

}  // namespace otprobe::util
