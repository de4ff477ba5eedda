#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mhist::cli {

/// Exit codes. 0 and 1 double as the real/synthetic outcome of `classify`.
enum Exit : int {
    kOk = 0,
    kSynthetic = 1,
    kUsage = 2,          // bad flags, unreadable or malformed input files, bad config
    kTooFewMinutiae = 3,
    kClassEmpty = 4,
    kCorruptModel = 5,   // model or index that cannot be decoded
    kFailure = 6,
};

/// Environment variable naming the default config file.
inline constexpr const char* kConfigEnv = "MHIST_CONFIG";

/// Runs one command. `args` excludes the program name. Primary results go to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mhist::cli
