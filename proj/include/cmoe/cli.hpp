#pragma once

// Entry point of the cmoe command-line tool. Exit statuses: 0 success,
// 2 configuration or input error, 3 numerical failure, 4 infeasible tuning.

namespace cmoe {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitInfeasible = 4;

int run_cli(int argc, const char* const* argv);

}  // namespace cmoe
