#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crushpool {

/// Entry point behind the crushpool executable. `args` excludes the program
/// name. Returns the process exit code: 0 success, 1 incomplete or failed,
/// 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crushpool
