#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace opidmd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

// Entry point of the `opidmd` tool. args[0] is the program name.
//   opidmd generate|fit|predict|compare|report --config <file> [--out <dir>] [--seed <u64>]
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace opidmd
