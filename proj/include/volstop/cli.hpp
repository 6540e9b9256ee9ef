#pragma once

namespace volstop {

// Full command-line entry point; returns the process exit code.
// 0 = success / check passed, 1 = verified check failed,
// 2 = input or validation error, 3 = solver non-convergence.
int run_cli(int argc, char** argv);

}  // namespace volstop
