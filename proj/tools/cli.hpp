#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace emi::cli {

enum ExitCode : int { kSuccess = 0, kParseError = 2, kConvergenceFailure = 3, kNumericalFailure = 4 };

/// Runs `emi <args...>` (args exclude the program name). Thread count for
/// section inversion comes from EMI_THREADS (default 1).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace emi::cli
