#pragma once

namespace subdetect {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace subdetect
