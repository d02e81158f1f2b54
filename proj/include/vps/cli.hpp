#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vps {

inline constexpr const char* kToolName = "vpstool";
inline constexpr const char* kToolVersion = "0.1.0";
// Default output directory when --out is not given.
inline constexpr const char* kOutDirEnv = "VPST_OUT_DIR";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitValidation = 2, kExitNumeric = 3 };

// Entry point shared by the executable and in-process tests. `args`
// excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vps
