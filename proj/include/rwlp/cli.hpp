#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rwlp::cli {

// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr double kGradcheckTolerance = 1e-5;
inline constexpr double kMccheckMaxZ = 3.5;

/// Runs `rwlp <subcommand> ...`. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rwlp::cli
