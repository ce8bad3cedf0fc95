#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lranker::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kDataError = 3,
  kRunError = 4,
};

/// Runs one `lranker <command> ...` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lranker::cli
