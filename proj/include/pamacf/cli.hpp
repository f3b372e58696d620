#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pamacf {

/// Runs the command-line tool; returns the process exit code
/// (0 success, 1 usage, 2 data, 3 numerical).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace pamacf
