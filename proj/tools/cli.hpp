#pragma once

#include <iosfwd>

namespace rdd::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kInternal = 4 };

/// Entry point of the `rdd` tool with injectable streams. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rdd::cli
