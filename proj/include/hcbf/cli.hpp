#pragma once

namespace hcbf {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitAbort = 2, kExitUnsafe = 3 };

/// Entry point of the hcbf command-line tool.
int run_cli(int argc, char** argv);

}  // namespace hcbf
