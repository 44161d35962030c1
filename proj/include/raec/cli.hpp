#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace raec {

/// Exit codes of `raec`.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;  // bad input, usage error, validation failure
inline constexpr int kExitIo = 2;          // I/O or backend failure

/// Runs the command line. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace raec
