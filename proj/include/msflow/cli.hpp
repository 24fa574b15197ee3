#pragma once

#include <iosfwd>

namespace msflow {

/// Entry point of the command-line tool. Exit codes: 0 success, 1 solver
/// failure, 2 invalid input or usage.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace msflow
