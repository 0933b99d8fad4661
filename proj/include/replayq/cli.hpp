#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace replayq {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIo = 2 };

/// Runs the `replayq` command line. `args` excludes the program name.
/// Machine-readable answers go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace replayq
