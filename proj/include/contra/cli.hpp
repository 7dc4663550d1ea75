#pragma once

#include <string>
#include <vector>

namespace contra::cli {

// Exit codes: 0 success, 2 config/schema failure, 3 data/file failure,
// 4 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Entry point shared by the binary and the end-to-end tests. `args` excludes
// the program name.
int run(const std::vector<std::string>& args);

}  // namespace contra::cli
