#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace derids::cli {

/// Process exit codes.
enum ExitCode : int {
  kSuccess = 0,
  kInternalFailure = 1,
  kUsageOrIo = 2,
  kAnomalyDetected = 3,  // `detect` only
};

/// Runs the command line; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace derids::cli
