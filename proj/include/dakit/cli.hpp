#pragma once

#include <string>
#include <vector>

namespace dakit::cli {

inline constexpr const char * kVersion = "0.1.0";

// Runs one subcommand. args excludes the program name (argv[1..]).
// Returns 0 on success, 1 on domain errors (printed as one JSON object on
// stderr), 2 on usage errors. Callable in-process; no global state.
int run(std::vector<std::string> args);

} // namespace dakit::cli
