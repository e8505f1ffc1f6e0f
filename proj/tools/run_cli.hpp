#pragma once

#include <iosfwd>

namespace fracweak {

/// Parses argv, runs the command and returns the process exit code. CSV output and
/// help text go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fracweak
