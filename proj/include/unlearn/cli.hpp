#pragma once

#include <string>
#include <vector>

namespace unlearn {

// Entry point behind main(); returns the process exit code.
//   0 success, 2 usage/validation, 3 IO or format failure, 4 numeric failure.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // args without program name

}  // namespace unlearn
