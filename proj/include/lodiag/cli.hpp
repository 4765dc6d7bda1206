#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lodiag::cli {

enum ExitCode : int { Success = 0, UsageError = 1, DataError = 2 };

/// Runs one `lodiag` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lodiag::cli
