#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ragvv/error.hpp"

namespace ragvv::cli {

enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kUsage = 2,
    kData = 3,
    kAuth = 4,
    kProvider = 5,
    kRunner = 6,
    kCompare = 7,
};

int exit_code_for(ErrorCategory category) noexcept;

/// Parses `args` (without the program name), runs the subcommand and returns
/// the process exit code. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ragvv::cli
