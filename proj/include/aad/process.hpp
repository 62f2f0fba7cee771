#pragma once

#include <string>

namespace aad {

struct ProcessResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string out;
    std::string err;
};

/// Runs `command` through /bin/sh with `input` on stdin and waits at most
/// `timeout_ms`; a timed-out child is killed. A non-empty `cwd` becomes the
/// child's working directory.
ProcessResult run_process(const std::string& command, const std::string& input, int timeout_ms,
                          const std::string& cwd = "");

}  // namespace aad
