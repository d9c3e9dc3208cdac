#pragma once

namespace anymdp::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kValidationFailure = 1;
inline constexpr int kUsageError = 2;
inline constexpr int kIoError = 3;

// Full command-line entry point; logs go to stderr, artifacts to files.
int cli_main(int argc, const char* const* argv);

}  // namespace anymdp::cli
