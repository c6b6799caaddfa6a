#pragma once

namespace qcode::cli {

// Entry point behind the qcode binary. Exit codes: 0 success, 2 config
// error, 3 transport error, 4 validation error.
int run(int argc, const char* const* argv);

}  // namespace qcode::cli
