#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace idsr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Runs one `idsr` invocation. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace idsr::cli
