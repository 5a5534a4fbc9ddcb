#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xkgat {

/// Entry point of the `xkgat` tool. Returns 0 on success, 1 on a usage error
/// and 2 on a data or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace xkgat
