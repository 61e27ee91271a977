#pragma once
// Command line entry point, exposed as a library function so tests can
// drive it in-process. Exit codes: 0 success, 1 validation/usage error,
// 2 runtime failure.

namespace deepsplit {

int cli_main(int argc, const char* const* argv);

}  // namespace deepsplit
