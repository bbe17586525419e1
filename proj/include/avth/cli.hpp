#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace avth::cli {

// Exit codes: 0 ok, 1 user error (bad arguments or inputs), 2 internal error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace avth::cli
