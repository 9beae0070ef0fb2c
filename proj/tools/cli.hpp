#pragma once

#include <iosfwd>

namespace harmalign::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Full command-line driver: parses argv, runs the subcommand, reports
/// errors on `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace harmalign::cli
