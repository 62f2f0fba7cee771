#pragma once

#include <iosfwd>

namespace aad::cli {

/// Exit codes: 0 ok, 1 operational error, 2 conflicts or invalid input.
/// `debug` and `serve` block until SIGINT or SIGTERM.
int main(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace aad::cli
