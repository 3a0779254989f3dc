#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace udiff {

/// Entry point of the udiff tool. args excludes the program name.
/// Exit codes: 0 success, 1 validation or runtime failure, 2 usage error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace udiff
