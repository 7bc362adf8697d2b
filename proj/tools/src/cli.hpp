#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace subdetect::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitEnumerationCap = 3;

/// Full CLI entry point; args exclude the program name. Output goes to `out`,
/// diagnostics to `err` (machine-readable one-line messages).
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace subdetect::cli
