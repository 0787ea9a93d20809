#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace a5cycle::cli {

enum ExitCode : int { kOk = 0, kMismatch = 1, kConfig = 2, kIo = 3 };

/// Runs one command line (without the program name). Results go to `out`,
/// progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace a5cycle::cli
