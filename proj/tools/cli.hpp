#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace skelattack::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line (without the program name). Status goes to `out`,
// errors to `err` as a single line. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skelattack::cli
