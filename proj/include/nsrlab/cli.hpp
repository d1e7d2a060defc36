#pragma once

#include <iosfwd>

namespace nsrlab {

/// Exit codes: 0 success, 1 runtime failure (including a failed gradient
/// check), 2 invalid usage or configuration.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nsrlab
