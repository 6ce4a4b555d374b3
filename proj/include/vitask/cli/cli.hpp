#pragma once

#include <string>
#include <vector>

namespace vitask::cli {

/// Runs one subcommand. Returns 0 on success, 1 on a usage error and 2 on a
/// runtime error; diagnostics go to standard error.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace vitask::cli
