#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace subdetect {

/// Shortest decimal string that round-trips the double exactly.
std::string format_double(double v);

std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t v);

}  // namespace subdetect
