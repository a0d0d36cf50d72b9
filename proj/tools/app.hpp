#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace shapedyn::cli {

enum ExitCode : int { kPassed = 0, kToleranceViolated = 1, kConfigInvalid = 2, kRuntimeError = 3 };

/// The command line without argv[0]: run, validate or presets.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace shapedyn::cli
