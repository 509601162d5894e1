#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qdisp {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the `qdisp` command line; `args` excludes the program name.
///
/// Subcommands: bounds, simulate, figure, sweep, replay. Diagnostics go to `err`
/// as one line; results go to `out` (or to files for figure / --out).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qdisp
