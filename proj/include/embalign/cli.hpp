#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace embalign {

/// Runs the command line (args excludes the program name). Results go to
/// `out`, structured errors to `err`. Returns 0 on success, 1 on usage or
/// configuration errors, 2 on data or format errors, 3 on numeric failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace embalign
