#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ssnt::cli {

/// Process exit statuses. Failures also print one line to stderr:
///   error code=<n> kind=<name> message="<text>"
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,      // unknown subcommand or flag, invalid value
  kIo = 3,         // missing or unwritable file
  kFormat = 4,     // malformed tensor container or CSV
  kShape = 5,      // inconsistent tensor shapes
  kNumerical = 6,  // SVD failure, non-finite loss
};

/// Runs one subcommand; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ssnt::cli
