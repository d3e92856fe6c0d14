#pragma once

#include <iosfwd>

namespace crossing {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,    ///< bad flags or configuration
  kExitRuntime = 2,  ///< I/O, numerical or model failure
  kExitGateFail = 3, ///< evaluation completed but missed its gates
};

/// Command-line entry point: gen-data, fit, condition, simulate, evaluate.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crossing
