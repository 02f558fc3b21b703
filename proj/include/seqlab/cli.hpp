#pragma once

namespace seqlab {

/// Entry point behind main(): parses argv, dispatches the subcommand, and
/// maps exceptions to exit codes (0 success, 1 usage/config, 2
/// runtime/numeric, 3 I/O).
int run_cli(int argc, const char* const* argv);

}  // namespace seqlab
