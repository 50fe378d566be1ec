#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kfgrad::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsage = 2;
inline constexpr int kNumerical = 3;
inline constexpr int kIo = 4;

// Environment variable consulted for the default RNG seed.
inline constexpr const char* kSeedEnv = "KFGRAD_SEED";

// Runs `kfgrad <args...>`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kfgrad::cli
