#pragma once

#include <iosfwd>

namespace tclab {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitSimulation = 3,
  kExitAnalysis = 4,
  kExitIo = 5,
};

/// Entry point of the tclab command line; returns the exit code.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tclab
