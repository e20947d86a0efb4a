#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace loadcycle::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Parses and runs one subcommand (gen, train, transfer, eval, bench, serve,
// gradcheck). args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace loadcycle::cli
