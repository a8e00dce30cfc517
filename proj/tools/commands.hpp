#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace covmod::cli {

// One invocation of the covmod tool; `args` excludes the program name.
// Returns the process exit code: 0 ok, 2 parse/input, 3 configuration
// (bad flags included), 4 numerical failure or a failed validation check.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace covmod::cli
