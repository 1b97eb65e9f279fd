#pragma once

#include <iosfwd>

namespace c2f::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kFailure = 2 };

// Subcommands: synth, train, predict, score, gradcheck. `--help` anywhere
// prints the flag contract and returns kOk.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace c2f::cli
