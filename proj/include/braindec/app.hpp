#pragma once

#include <ostream>

namespace braindec {

inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitCapacity = 4;

/// Command-line entry point. Returns the process exit code
/// (0 ok, 2 usage/config, 3 data consistency, 4 capacity).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace braindec
