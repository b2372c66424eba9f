#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gowu {

// Full command-line driver, callable in-process so tests can assert on exit
// codes and captured output. `args` excludes the program name. Exit codes:
// 0 success, 1 runtime failure, 2 configuration or usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gowu
