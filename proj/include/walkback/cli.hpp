#pragma once

#include <string>
#include <vector>

namespace walkback {

// Entry point behind the `walkback` binary; exposed so tests can drive
// commands in-process. Returns the process exit code; errors print one
// machine-parseable line ("error: <category>: <message>") on stderr.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace walkback
