#pragma once

#include <string>
#include <vector>

namespace ragforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Parses argv and dispatches to a subcommand. Exit 0 on success, 1 on a
// domain error, 2 on a usage or configuration error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace ragforge::cli
