#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mfsg::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int { ok = 0, failure = 1, input_error = 2, numerical_error = 3 };

// Runs the command line `args` (program name excluded) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mfsg::cli
