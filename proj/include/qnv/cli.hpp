#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qnv::cli {

enum ExitStatus : int { kOk = 0, kViolated = 1, kUnknown = 2, kError = 3 };

/// Runs one command line (without the program name). Reports go to `out`,
/// diagnostics and usage to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qnv::cli
