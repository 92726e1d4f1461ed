#pragma once

#include <string>
#include <vector>

namespace egolayers {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitStageFailure = 1, kExitConfigError = 2 };

/// Runs one invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace egolayers
