#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pvm::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kDataError = 3,
  kNumericFault = 4,
};

// Entry point of the `pvm` tool. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pvm::cli
