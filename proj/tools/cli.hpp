#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mergelab::cli {

// Runs the command line `args` (args[0] is the program name). Returns the
// process exit status: 0 when the requested artifact was fully written.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mergelab::cli
