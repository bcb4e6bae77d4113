#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mira::cli {

/// Runs one `mira` invocation; args exclude the program name. Returns the
/// process exit code (0, 2 configuration, 3 data, 4 aborted run).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mira::cli
