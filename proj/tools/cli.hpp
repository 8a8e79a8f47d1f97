#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neckface::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitTraining = 4;

/// Parses and runs one command line. Never throws; failures map to the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace neckface::cli
