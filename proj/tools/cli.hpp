#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cycflow::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cycflow::cli
