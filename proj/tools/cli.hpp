#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mgcn::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 success, 1 usage/configuration, 2 data or I/O, 3 numeric failure.
enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

/// Runs one command; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mgcn::cli
