#pragma once

#include <string>
#include <vector>

namespace lar::cli {

// Runs the full command-line tool in-process. argv excludes the program name.
// Returns the process exit code: 0 success, 1 validation/usage failure,
// 2 I/O failure.
int run(const std::vector<std::string>& argv);

}  // namespace lar::cli
