#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lowmt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

// Runs one command line (args excludes the program name). Failures print a
// single "error: kind=... message=..." line to err.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string error_line(const std::exception& e);

}  // namespace lowmt::cli
