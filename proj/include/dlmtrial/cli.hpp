#pragma once

#include <iosfwd>

namespace dlmtrial {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitMismatch = 1;  // replay did not reproduce the log
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;

/// Entry point of `dlmtrial`. Results go to `out`; failures are one JSON
/// line on `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dlmtrial
