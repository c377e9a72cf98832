#pragma once

#include <iosfwd>

namespace wasserquick {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 1,       // malformed input, config or usage
  kExitInfeasible = 2,  // no least favorable pair exists
  kExitNumerical = 3,   // solver or verification failure
};

/// Runs one command (`solve-lfd`, `verify`, `bin`, `calibrate`, `simulate`,
/// `compare`) and returns its exit code. Results go to `out` unless an output
/// path is given; diagnostics go to `err`.
int run_cli(int argc, const char* const argv[], std::ostream& out, std::ostream& err);

}  // namespace wasserquick
