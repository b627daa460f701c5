#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace agedg::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace agedg::cli
