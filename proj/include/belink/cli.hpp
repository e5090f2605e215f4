#pragma once

#include <string>
#include <vector>

namespace belink {

// Full CLI entry point. Exit codes: 0 success, 1 usage/config error, 2 data
// error, 3 total backend failure.
int cli_main(const std::vector<std::string>& args);

} // namespace belink
