#pragma once

// Command-line front end: simulate, train, predict, track, evaluate, ablate.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error,
// 3 a requested check failed (training did not improve, ablation ordering).

namespace tbp::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kCheckFailed = 3;

int run(int argc, const char* const* argv);

}  // namespace tbp::cli
