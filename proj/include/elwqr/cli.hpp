#pragma once

namespace elwqr {

// Entry point of the elwqr tool.  Exit codes: 0 success, 1 validation or
// usage error, 2 numerical failure.
int run_cli(int argc, const char* const* argv);

} // namespace elwqr
