#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace toothseg {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // a stage failed; stderr names it
inline constexpr int kExitUsage = 2;    // bad flags or arguments

/// Runs one `toothseg` invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace toothseg
