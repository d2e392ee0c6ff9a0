#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lcgan::cli {

enum ExitCode { kOk = 0, kValidationError = 1, kRuntimeFailure = 2 };

/// Thread count from LCGAN_THREADS when set to a positive integer, otherwise
/// `fallback`.
int threads_from_env(int fallback);

/// Parses and runs one command. Diagnostics go to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lcgan::cli
