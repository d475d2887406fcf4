#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace splitscreen {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 2 usage, 3 data, 4 numerical.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// SHA-1 of a file's bytes, hex encoded.
std::string file_digest(const std::string& path);

}  // namespace splitscreen
