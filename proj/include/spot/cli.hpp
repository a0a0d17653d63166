#pragma once

#include <string>
#include <vector>

namespace spot {

// Entry point shared by the spot binary and the tests. Exit codes:
// 0 success, 1 usage error, 2 data error, 3 numerical failure.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, char** argv);

}  // namespace spot
