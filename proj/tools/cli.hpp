#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace robust_merton::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kIoOrParse = 1,
    kValidation = 2,
    kVerificationFailed = 3,
};

/// Environment variable that overrides the default Monte Carlo seed.
inline constexpr const char* kSeedEnv = "ROBUST_MERTON_SEED";
inline constexpr unsigned long long kDefaultSeed = 20240517ULL;

/// Runs the command line `args` (without the program name). Output files named
/// "-" go to `out`; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace robust_merton::cli
