#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tlkit::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kValidation = 1,  // bad input data, parse or validation failure
  kNumeric = 2,     // numeric failure or a tolerance exceeded
  kUsage = 64,      // unknown flag or malformed command line
};

inline constexpr unsigned long long kDefaultSeed = 41;

/// Runs one subcommand (argv without the program name). Reports go to `out`
/// unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tlkit::cli
