#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace abscope {

/// Stable process exit codes.
enum ExitCode : int {
    kExitSuccess = 0,
    kExitFailure = 1,
    kExitInputError = 2,
    kExitPreconditionError = 3,
};

/// Entry point of the `abscope` tool (subcommands exact, simulate, reconstruct,
/// analyze, coefficients). Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace abscope
