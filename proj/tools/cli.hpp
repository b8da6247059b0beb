#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace varlasso::cli {

// Stable exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kModelError = 3;
inline constexpr int kEstimatorError = 4;
inline constexpr int kDiagnosticsError = 5;

/// Runs the command line `args` (without the program name). Human-readable
/// progress goes to `out`, errors to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace varlasso::cli
