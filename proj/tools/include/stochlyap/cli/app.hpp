#pragma once

#include <ostream>

namespace stochlyap::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitRuntimeError = 1,
  kExitConfigError = 2,
  kExitNotCertified = 3,
};

/// Entry point of the stochlyap tool: build, analyze, invariant, simulate, export.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stochlyap::cli
