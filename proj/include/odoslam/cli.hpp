#pragma once

#include <iosfwd>

namespace odoslam {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPipeline = 3;

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace odoslam
