#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rfodmr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming a directory of default configs
/// (<dir>/<command>.json) and a search root for relative --config paths.
inline constexpr const char* kConfigDirEnv = "RFODMR_CONFIG_DIR";

/// Runs one command line (without the program name). Returns the exit code:
/// 0 success, 2 usage or input error, 1 internal error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rfodmr::cli
