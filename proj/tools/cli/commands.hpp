#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace compgen::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

/// Parses `args` (without the program name), runs one subcommand and maps
/// failures onto exit codes. Summary lines go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace compgen::cli
