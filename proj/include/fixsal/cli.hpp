#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fixsal {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitMissingInput = 3 };

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fixsal
