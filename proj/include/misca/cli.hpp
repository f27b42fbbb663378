#pragma once

#include <string>
#include <vector>

namespace misca {

// Entry point behind the `misca` binary; returns the process exit code.
// Subcommands: train, eval, predict, gradcheck, inspect.
int run_cli(const std::vector<std::string>& args);

}  // namespace misca
