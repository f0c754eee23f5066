#pragma once

namespace carrysim::cli {

// Parses argv and runs the chosen subcommand. Returns 0 on success, 1 on a
// runtime failure, 2 on a usage error.
int dispatch(int argc, const char* const* argv);

}  // namespace carrysim::cli
