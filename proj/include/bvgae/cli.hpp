#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bvgae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Default output root when --out is not given.
inline constexpr const char* kOutputRootEnv = "BVGAE_OUTPUT_ROOT";

// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bvgae::cli
