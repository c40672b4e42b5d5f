#pragma once

#include <iosfwd>

namespace scripta::cli {

/// Runs one `scripta` subcommand. Returns the process exit code; diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace scripta::cli
