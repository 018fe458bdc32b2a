#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dynprice::cli {

/// Seed used when neither --seed nor DYNPRICE_SEED is given.
inline constexpr std::uint64_t kDefaultSeed = 20140601;
inline constexpr const char* kSeedEnv = "DYNPRICE_SEED";

enum ExitCode : int { kOk = 0, kInvalid = 1, kNonConvergence = 2, kGoldenMismatch = 3 };

/// Runs one command line (args[0] is the program name). Reports go to `out`,
/// diagnostics to `err`; CSV artifacts go to --out or to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dynprice::cli
