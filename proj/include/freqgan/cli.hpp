#pragma once

#include <string>
#include <vector>

namespace freqgan::cli {

/// Batch entry point. Exit codes: 0 success, 2 usage error, 3 config parse
/// failure, 1 anything else (with a diagnostic on stderr).
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without program name

}  // namespace freqgan::cli
