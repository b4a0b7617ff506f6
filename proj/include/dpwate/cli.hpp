#pragma once

namespace dpwate::cli {

// Entry point for the command-line tool; returns the process exit code.
// 0 = success, 2 = validation error, 3 = data error,
// 4 = degenerate-partition error, 1 = unexpected failure.
int run(int argc, const char* const* argv);

}  // namespace dpwate::cli
