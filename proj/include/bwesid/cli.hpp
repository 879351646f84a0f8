#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bwesid {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs the command line tool. `args` includes the program name. Diagnostics go
// to `err`; only --version and --help write to `out`.
int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bwesid
