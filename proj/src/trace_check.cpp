#include "aad/trace_check.hpp"

#include <optional>

namespace aad {

namespace {

struct Open {
    std::string node;
    long long depth;
};

}  // namespace

TraceCheckResult check_trace(const Value& doc) {
    TraceCheckResult r;
    auto problem = [&](long long seq, const std::string& msg) {
        r.ok = false;
        r.problems.push_back("seq " + std::to_string(seq) + ": " + msg);
    };
    if (!doc.is_object() || !doc.find("events") || !doc.find("events")->is_array()) {
        r.ok = false;
        r.problems.push_back("document must be an object with an events array");
        return r;
    }
    for (const char* key : {"session", "graph_name"}) {
        if (!doc.find(key) || !doc.find(key)->is_string()) {
            r.ok = false;
            r.problems.push_back(std::string("missing string field '") + key + "'");
        }
    }

    const auto& events = doc.find("events")->as_array();
    std::vector<Open> open;
    long long depth = 1;
    bool ended = false;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const Value& e = events[i];
        long long at = static_cast<long long>(i);
        const Value* seq = e.find("seq");
        const Value* kind = e.find("kind");
        const Value* fd = e.find("frame_depth");
        if (!seq || !seq->is_number() || !kind || !kind->is_string() || !fd || !fd->is_number() || !e.find("ts")) {
            problem(at, "event lacks seq, ts, kind or frame_depth");
            continue;
        }
        if (seq->as_number() != static_cast<double>(i)) problem(at, "seq is " + format_number(seq->as_number()));
        if (ended) problem(at, "event after SessionEnd");
        const std::string& k = kind->as_string();
        long long d = static_cast<long long>(fd->as_number());
        const Value* nv = e.find("node");
        std::optional<std::string> node;
        if (nv && nv->is_string()) node = nv->as_string();

        if (k == "SessionStart") {
            if (i != 0) problem(at, "SessionStart not first");
        } else if (i == 0) {
            problem(at, "first event is " + k);
        }

        if (k == "NodeEnter") {
            if (!node) problem(at, "NodeEnter without node");
            if (d != depth) problem(at, "NodeEnter at depth " + std::to_string(d) + ", frame depth is " + std::to_string(depth));
            if (!open.empty() && open.back().depth == d) problem(at, "node '" + open.back().node + "' still open at this depth");
            open.push_back({node.value_or(""), d});
        } else if (k == "NodeExit" || (k == "ErrorRaised" && node)) {
            if (open.empty() || open.back().depth != d || open.back().node != node.value_or("")) {
                problem(at, k + " for '" + node.value_or("") + "' does not close the open node");
            } else {
                open.pop_back();
            }
        } else if (k == "ErrorRaised") {
            if (!open.empty() && open.back().depth == d) problem(at, "anonymous ErrorRaised while '" + open.back().node + "' is open");
        } else if (k == "FramePush") {
            if (d != depth + 1) problem(at, "FramePush to depth " + std::to_string(d) + " from " + std::to_string(depth));
            depth = d;
        } else if (k == "FramePop") {
            if (d != depth || depth <= 1) problem(at, "FramePop of depth " + std::to_string(d) + " at " + std::to_string(depth));
            if (!open.empty() && open.back().depth >= d) problem(at, "frame popped with '" + open.back().node + "' open");
            depth = d - 1;
        } else if (k == "SessionEnd") {
            ended = true;
            if (depth != 1) problem(at, "SessionEnd with " + std::to_string(depth - 1) + " frames open");
            if (!open.empty()) problem(at, "SessionEnd with '" + open.back().node + "' open");
        } else if (k != "SessionStart" && k != "VarUpdate" && k != "LlmCall" && k != "Display" && k != "BreakpointHit" &&
                   k != "ErrorCaught") {
            problem(at, "unknown kind '" + k + "'");
        }
    }
    if (events.empty()) {
        r.ok = false;
        r.problems.push_back("no events");
    }
    return r;
}

}  // namespace aad
