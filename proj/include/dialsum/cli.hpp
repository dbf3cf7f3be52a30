#pragma once

#include <iosfwd>

namespace dialsum::cli {

/// Runs one subcommand. Returns 0 on success, 1 on usage errors and 2 on
/// data errors.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace dialsum::cli
