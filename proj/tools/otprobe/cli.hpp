#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace otprobe::cli {

enum ExitCode : int {
    exit_ok = 0,
    /// Target unreachable, protocol refusal, report backend failure.
    exit_tool_error = 1,
    /// Bad flags or parameters rejected by validation.
    exit_usage = 2,
};

/// Runs one command. `args` excludes the program name. Long-running commands
/// (`serve`, `sim ... serve`) block until SIGINT/SIGTERM or request_stop().
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Makes a blocking serve command return. Safe from any thread.
void request_stop() noexcept;

}  // namespace otprobe::cli
