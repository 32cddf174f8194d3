#ifndef EGCN_TOOLS_CLI_HPP
#define EGCN_TOOLS_CLI_HPP

#include <string>
#include <vector>

namespace egcn::cli {

/// Runs one CLI invocation (argv without the program name).
/// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
/// failure.
int run(const std::vector<std::string>& args);

} // namespace egcn::cli

#endif // EGCN_TOOLS_CLI_HPP
