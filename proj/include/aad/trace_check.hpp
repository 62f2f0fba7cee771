#pragma once

#include <string>
#include <vector>

#include "aad/value.hpp"

namespace aad {

struct TraceCheckResult {
    bool ok = true;
    std::vector<std::string> problems;
};

/// Well-formedness of an exported trace log ({session, graph_name, events}):
/// dense seq from 0, every NodeEnter closed by a NodeExit or ErrorRaised for
/// the same node at the same frame depth, FramePush/FramePop balanced. A log
/// without SessionEnd may leave frames and nodes open.
TraceCheckResult check_trace(const Value& doc);

}  // namespace aad
