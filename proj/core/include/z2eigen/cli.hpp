#pragma once
#include <string>
#include <vector>

namespace z2eigen {

// Entry point behind the z2eigen binary. Exit codes: 0 success, 1 usage
// error, 2 numerical abort.
int run_cli(const std::vector<std::string>& args);

}  // namespace z2eigen
