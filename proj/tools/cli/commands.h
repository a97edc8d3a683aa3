#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clarigen::cli {

// Runs one subcommand. Log lines go to `out` (and to the run's log file);
// errors go to `err` as a JSON line. Returns the process exit code:
// 0 success, 1 contract or usage error, 2 I/O error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clarigen::cli
