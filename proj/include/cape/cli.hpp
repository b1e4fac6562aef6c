#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cape::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
// `args` excludes the program name.
int run_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_main(int argc, char** argv);

}  // namespace cape::cli
