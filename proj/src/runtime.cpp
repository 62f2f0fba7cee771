#include "aad/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "aad/process.hpp"
#include "aad/scriptlet.hpp"

namespace aad::runtime {

namespace {

long long system_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

// Per-graph routing tables.
struct Compiled {
    std::shared_ptr<const TopologyGraph> graph;
    std::map<std::string, const Node*, std::less<>> nodes;
    std::map<PortRef, PortRef> out;
    std::map<std::string, std::set<PortRef>> join_inputs;  // Summary -> wired sources
    std::map<std::string, std::set<std::string>> regions;
    std::map<std::string, std::size_t> topo_index;

    explicit Compiled(std::shared_ptr<const TopologyGraph> g) : graph(std::move(g)) {
        for (const auto& n : graph->nodes) nodes.emplace(n.id, &n);
        for (const auto& e : graph->edges) {
            out.emplace(e.from, e.to);
            auto it = nodes.find(e.to.node);
            if (it != nodes.end() && it->second->type.kind == NodeKind::Summary) join_inputs[e.to.node].insert(e.from);
        }
        regions = error_regions(*graph);
        auto order = topological_order(*graph);
        for (std::size_t i = 0; i < order.size(); ++i) topo_index[order[i]] = i;
    }

    const Node& node(std::string_view id) const {
        auto it = nodes.find(id);
        if (it == nodes.end()) throw Error("UnknownNode", "no node '" + std::string(id) + "'");
        return *it->second;
    }

    std::optional<PortRef> target(const std::string& node, const std::string& port) const {
        auto it = out.find(PortRef{node, port});
        if (it == out.end()) return std::nullopt;
        return it->second;
    }
};

enum class TokKind { Data, Fire, HandlerExit };

struct Token {
    TokKind kind = TokKind::Data;
    PortRef target;
    std::optional<Value> value;  // nullopt: dead token
    PortRef from;
};

struct LoopState {
    std::string node;
    Value::Array items;
    Value::Array results;
    std::size_t next = 0;
};

struct Handler {
    std::string node;
    std::size_t mark = 0;
};

struct Frame {
    std::shared_ptr<const Compiled> g;
    FrameKind kind = FrameKind::Root;
    std::string owner;
    long long index = 0;
    Value::Object vars;
    std::vector<Token> stack;
    std::map<std::string, std::map<PortRef, std::optional<Value>>> joins;
    std::vector<Handler> handlers;
    std::string waiting;  // node blocked on a child frame
    std::optional<LoopState> loop;
};

const Value* config_value(const Node& n, std::string_view key) {
    auto it = n.config.find(key);
    return it == n.config.end() ? nullptr : &it->second;
}

std::string config_string(const Node& n, std::string_view key, std::string fallback) {
    const Value* v = config_value(n, key);
    if (!v) return fallback;
    if (!v->is_string()) {
        throw Error("InvalidConfig", "node '" + n.id + "': config '" + std::string(key) + "' must be a string");
    }
    return v->as_string();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(TraceKind k) {
    switch (k) {
        case TraceKind::SessionStart: return "SessionStart";
        case TraceKind::NodeEnter: return "NodeEnter";
        case TraceKind::NodeExit: return "NodeExit";
        case TraceKind::VarUpdate: return "VarUpdate";
        case TraceKind::LlmCall: return "LlmCall";
        case TraceKind::Display: return "Display";
        case TraceKind::BreakpointHit: return "BreakpointHit";
        case TraceKind::FramePush: return "FramePush";
        case TraceKind::FramePop: return "FramePop";
        case TraceKind::ErrorRaised: return "ErrorRaised";
        case TraceKind::ErrorCaught: return "ErrorCaught";
        case TraceKind::SessionEnd: return "SessionEnd";
    }
    return "SessionStart";
}

TraceKind parse_trace_kind(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(TraceKind::SessionEnd); ++i) {
        auto k = static_cast<TraceKind>(i);
        if (to_string(k) == s) return k;
    }
    throw Error("SchemaError", "unknown trace event kind '" + std::string(s) + "'");
}

Value event_to_value(const TraceEvent& e) {
    Value::Object o{{"seq", e.seq},
                    {"ts", e.ts},
                    {"kind", std::string(to_string(e.kind))},
                    {"frame_depth", e.frame_depth},
                    {"data", e.data}};
    if (e.node) o.emplace("node", *e.node);
    return o;
}

TraceEvent event_from_value(const Value& v) {
    if (!v.is_object()) throw Error("SchemaError", "trace event must be an object");
    auto num = [&](std::string_view key) -> long long {
        const Value* x = v.find(key);
        if (!x || !x->is_number() || std::floor(x->as_number()) != x->as_number()) {
            throw Error("SchemaError", "trace event field '" + std::string(key) + "' must be an integer");
        }
        return static_cast<long long>(x->as_number());
    };
    TraceEvent e;
    e.seq = num("seq");
    e.ts = v.find("ts") ? num("ts") : 0;
    e.frame_depth = static_cast<int>(num("frame_depth"));
    const Value* kind = v.find("kind");
    if (!kind || !kind->is_string()) throw Error("SchemaError", "trace event needs a string kind");
    e.kind = parse_trace_kind(kind->as_string());
    if (const Value* n = v.find("node")) {
        if (!n->is_string()) throw Error("SchemaError", "trace event node must be a string");
        e.node = n->as_string();
    }
    if (const Value* d = v.find("data")) e.data = *d;
    return e;
}

void GraphLibrary::add(std::shared_ptr<const TopologyGraph> graph) { graphs_[graph->name] = std::move(graph); }

std::shared_ptr<const TopologyGraph> GraphLibrary::find(std::string_view name) const {
    auto it = graphs_.find(name);
    return it == graphs_.end() ? nullptr : it->second;
}

std::vector<std::string> GraphLibrary::names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : graphs_) out.push_back(k);
    return out;
}

Value ErrorRecord::to_value() const {
    return Value::Object{{"message", message}, {"node", node}, {"kind", kind}};
}

std::string_view to_string(StatusKind k) {
    switch (k) {
        case StatusKind::Ready: return "Ready";
        case StatusKind::Running: return "Running";
        case StatusKind::PausedBreakpoint: return "PausedBreakpoint";
        case StatusKind::AwaitingInput: return "AwaitingInput";
        case StatusKind::Finished: return "Finished";
        case StatusKind::Failed: return "Failed";
    }
    return "Ready";
}

Value Status::to_value() const {
    Value::Object o{{"state", std::string(to_string(kind))}};
    switch (kind) {
        case StatusKind::PausedBreakpoint: o.emplace("node", node); break;
        case StatusKind::AwaitingInput:
            o.emplace("node", node);
            o.emplace("prompt", prompt);
            break;
        case StatusKind::Finished: o.emplace("result", result); break;
        case StatusKind::Failed: o.emplace("error", error.to_value()); break;
        default: break;
    }
    return o;
}

std::string_view to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::Advanced: return "Advanced";
        case OutcomeKind::Paused: return "Paused";
        case OutcomeKind::NeedsInput: return "NeedsInput";
        case OutcomeKind::Done: return "Done";
        case OutcomeKind::Error: return "Error";
    }
    return "Advanced";
}

Value StepOutcome::to_value() const {
    Value::Object o{{"outcome", std::string(to_string(kind))}};
    if (!node.empty()) o.emplace("node", node);
    if (kind == OutcomeKind::Done) o.emplace("result", value);
    if (kind == OutcomeKind::NeedsInput) o.emplace("prompt", value);
    if (kind == OutcomeKind::Error) o.emplace("error", error.to_value());
    return o;
}

std::string_view to_string(FrameKind k) {
    switch (k) {
        case FrameKind::Root: return "Root";
        case FrameKind::SubAgent: return "SubAgent";
        case FrameKind::LoopBody: return "LoopBody";
    }
    return "Root";
}

// ---------------------------------------------------------------------------

struct Session::Impl {
    std::string id;
    std::shared_ptr<const TopologyGraph> graph;
    SessionOptions options;
    Services services;
    Status status;
    std::vector<TraceEvent> trace;
    llm::UsageTotals usage;
    std::vector<Frame> frames;
    std::map<std::string, Value> scratch;  // plugin namespace -> state
    std::map<std::string, std::shared_ptr<scriptlet::Scriptlet>> exprs;
    std::map<std::string, std::shared_ptr<scriptlet::Template>> templates;
    std::vector<llm::MimicRule> rules;
    long long call_index = 0;
    long long started_at = 0;
    std::optional<long long> ended_at;
    std::function<void(const TraceEvent&)> listener;
    bool resume_paused = false;

    long long now() const { return options.clock ? options.clock() : system_ms(); }

    int depth() const { return static_cast<int>(frames.size()); }
    Frame& top() { return frames.back(); }

    void emit(TraceKind kind, std::optional<std::string> node, Value data = Value::Object{}, int depth_override = 0) {
        TraceEvent e;
        e.seq = static_cast<long long>(trace.size());
        e.ts = now();
        e.kind = kind;
        e.node = std::move(node);
        e.frame_depth = depth_override ? depth_override : depth();
        e.data = std::move(data);
        trace.push_back(e);
        if (listener) listener(trace.back());
    }

    const scriptlet::Scriptlet& expr(const std::string& src) {
        auto& slot = exprs[src];
        if (!slot) slot = std::make_shared<scriptlet::Scriptlet>(scriptlet::Scriptlet::parse(src));
        return *slot;
    }

    const scriptlet::Template& templ(const std::string& src) {
        auto& slot = templates[src];
        if (!slot) slot = std::make_shared<scriptlet::Template>(scriptlet::Template::parse(src));
        return *slot;
    }

    static Value::Object env_for(const Frame& f, const Value& payload) {
        Value::Object env = f.vars;
        env["payload"] = payload;
        return env;
    }

    // -- routing -----------------------------------------------------------

    using Emission = std::pair<PortRef, std::optional<Value>>;  // (target, value)

    void push_emissions(Frame& f, const std::string& from_node, std::vector<std::pair<std::string, Emission>> ems) {
        for (auto it = ems.rbegin(); it != ems.rend(); ++it) {
            Token t;
            t.target = it->second.first;
            t.value = std::move(it->second.second);
            t.from = PortRef{from_node, it->first};
            f.stack.push_back(std::move(t));
        }
    }

    void propagate_dead(Frame& f, const Node& n) {
        std::vector<std::pair<std::string, Emission>> ems;
        for (const auto& p : n.out_ports) {
            if (n.type.kind == NodeKind::ArrayLoop && p == "body") continue;
            if (auto t = f.g->target(n.id, p)) ems.push_back({p, {*t, std::nullopt}});
        }
        push_emissions(f, n.id, std::move(ems));
    }

    // -- settle: process bookkeeping tokens until a live node is on top ------

    bool quiesce(Frame& f) {
        std::string best;
        std::size_t best_idx = 0;
        for (const auto& [node, buf] : f.joins) {
            if (buf.empty()) continue;
            std::size_t idx = f.g->topo_index.at(node);
            if (best.empty() || idx < best_idx) {
                best = node;
                best_idx = idx;
            }
        }
        if (best.empty()) return false;
        fire_join(f, best);
        return true;
    }

    void fire_join(Frame& f, const std::string& node) {
        auto buf = std::move(f.joins[node]);
        f.joins.erase(node);
        Value::Array live;
        bool any_live = false;
        for (auto& [from, v] : buf) {
            if (v) {
                any_live = true;
                live.push_back(std::move(*v));
            }
        }
        Token t;
        t.kind = TokKind::Fire;
        t.target = PortRef{node, "in"};
        if (any_live) t.value = Value(std::move(live));
        f.stack.push_back(std::move(t));
    }

    void deliver_join(Frame& f, Token t) {
        auto& buf = f.joins[t.target.node];
        buf[t.from] = std::move(t.value);
        const auto& inputs = f.g->join_inputs.at(t.target.node);
        bool complete = std::all_of(inputs.begin(), inputs.end(), [&](const PortRef& p) { return buf.count(p) > 0; });
        if (complete) fire_join(f, t.target.node);
    }

    void settle() {
        for (;;) {
            if (status.terminal() || status.kind == StatusKind::AwaitingInput) return;
            Frame& f = top();
            if (f.stack.empty()) {
                if (quiesce(f)) continue;
                throw Error("NoResult", f.kind == FrameKind::LoopBody
                                            ? "loop body finished without reaching the loopback port"
                                            : "graph finished without reaching an End node");
            }
            Token& t = f.stack.back();
            if (t.kind == TokKind::HandlerExit) {
                std::string h = t.target.node;
                f.stack.pop_back();
                for (auto it = f.handlers.rbegin(); it != f.handlers.rend(); ++it) {
                    if (it->node == h) {
                        f.handlers.erase(std::next(it).base());
                        break;
                    }
                }
                if (auto c = f.g->target(h, "catch")) push_emissions(f, h, {{"catch", {*c, std::nullopt}}});
                continue;
            }
            const Node& n = f.g->node(t.target.node);
            if (t.kind == TokKind::Fire) {
                if (t.value) return;
                f.stack.pop_back();
                propagate_dead(f, n);
                continue;
            }
            if (n.type.kind == NodeKind::ArrayLoop && t.target.port == kLoopbackPort) {
                Token tok = std::move(t);
                f.stack.pop_back();
                if (tok.value) complete_iteration(tok.target.node, std::move(*tok.value));
                continue;
            }
            if (n.type.kind == NodeKind::Summary) {
                Token tok = std::move(t);
                f.stack.pop_back();
                deliver_join(f, std::move(tok));
                continue;
            }
            if (!t.value) {
                f.stack.pop_back();
                propagate_dead(f, n);
                continue;
            }
            return;
        }
    }

    // Settles, converting bookkeeping failures into unwinding.
    void advance() {
        while (true) {
            try {
                settle();
                return;
            } catch (const Error& e) {
                unwind(ErrorRecord{e.what(), "", e.code()}, "", false);
            }
        }
    }

    // -- frames --------------------------------------------------------------

    void push_frame(std::shared_ptr<const Compiled> g, FrameKind kind, const std::string& owner, long long index,
                    Value::Object vars, Token first) {
        Frame f;
        f.g = std::move(g);
        f.kind = kind;
        f.owner = owner;
        f.index = index;
        f.vars = std::move(vars);
        f.stack.push_back(std::move(first));
        frames.push_back(std::move(f));
        Value::Object data{{"kind", std::string(to_string(kind))}, {"node", owner}};
        if (kind == FrameKind::LoopBody) data.emplace("index", index);
        emit(TraceKind::FramePush, owner, data);
    }

    void pop_frame() {
        const Frame& f = top();
        Value::Object data{{"kind", std::string(to_string(f.kind))}, {"node", f.owner}};
        if (f.kind == FrameKind::LoopBody) data.emplace("index", f.index);
        emit(TraceKind::FramePop, f.owner, data);
        frames.pop_back();
    }

    void push_loop_iteration(Frame& parent) {
        LoopState& ls = *parent.loop;
        auto body = parent.g->target(ls.node, "body");
        Value::Object vars = parent.vars;
        const Value& item = ls.items[ls.next];
        vars["item"] = item;
        vars["index"] = static_cast<long long>(ls.next);
        Token t;
        t.target = *body;
        t.value = item;
        t.from = PortRef{ls.node, "body"};
        auto g = parent.g;
        push_frame(g, FrameKind::LoopBody, ls.node, static_cast<long long>(ls.next), std::move(vars), std::move(t));
    }

    void complete_iteration(const std::string& loop_node, Value result) {
        Frame& f = top();
        if (f.kind != FrameKind::LoopBody || f.owner != loop_node) {
            throw Error("IllegalLoopback", "token reached loopback of '" + loop_node + "' outside its body");
        }
        pop_frame();
        Frame& parent = top();
        LoopState& ls = *parent.loop;
        ls.results.push_back(std::move(result));
        ++ls.next;
        if (ls.next < ls.items.size()) {
            push_loop_iteration(parent);
            return;
        }
        Value out = Value(std::move(ls.results));
        std::string node = ls.node;
        parent.loop.reset();
        parent.waiting.clear();
        finish_node(parent, parent.g->node(node), out, "done");
    }

    // Emits NodeExit, applies `store`, routes the output on `port`.
    void finish_node(Frame& f, const Node& n, const Value& out, const std::string& port) {
        std::vector<std::pair<std::string, Emission>> ems;
        auto tgt = f.g->target(n.id, port);
        if (tgt) {
            ems.push_back({port, {*tgt, out}});
        } else if (!(n.type.kind == NodeKind::ArrayLoop && port == "done")) {
            throw Error("RouteMissing", "port '" + port + "' of '" + n.id + "' is not wired");
        }
        exit_node(f, n, out, port);
        push_emissions(f, n.id, std::move(ems));
    }

    void exit_node(Frame& f, const Node& n, const Value& out, const std::string& port) {
        Value::Object data{{"output", out}};
        if (!port.empty()) data.emplace("port", port);
        emit(TraceKind::NodeExit, n.id, data);
        if (const Value* s = config_value(n, "store"); s && s->is_string() && !s->as_string().empty()) {
            f.vars[s->as_string()] = out;
            emit(TraceKind::VarUpdate, n.id, Value::Object{{"key", s->as_string()}, {"value", out}});
        }
    }

    // -- error handling ------------------------------------------------------

    void unwind(ErrorRecord rec, std::string point, bool point_open) {
        for (;;) {
            Frame& f = top();
            Value data = Value::Object{{"error", rec.to_value()}};
            emit(TraceKind::ErrorRaised, point_open ? std::optional<std::string>(point) : std::nullopt, data);
            for (std::size_t i = f.handlers.size(); i-- > 0;) {
                const Handler h = f.handlers[i];
                const auto& region = f.g->regions.at(h.node);
                auto catch_target = f.g->target(h.node, "catch");
                if (!point_open || !region.count(point) || !catch_target) continue;
                f.stack.resize(h.mark);
                f.handlers.resize(i);
                for (const auto& r : region) f.joins.erase(r);
                f.waiting.clear();
                f.loop.reset();
                emit(TraceKind::ErrorCaught, h.node, data);
                push_emissions(f, h.node, {{"catch", {*catch_target, rec.to_value()}}});
                return;
            }
            if (frames.size() == 1) {
                status.kind = StatusKind::Failed;
                status.error = rec;
                end_session();
                return;
            }
            point = f.owner;
            point_open = true;
            pop_frame();
            top().waiting.clear();
            top().loop.reset();
        }
    }

    void end_session() {
        ended_at = now();
        Value::Object data{{"status", std::string(to_string(status.kind))}};
        if (status.kind == StatusKind::Finished) data.emplace("result", status.result);
        if (status.kind == StatusKind::Failed) data.emplace("error", status.error.to_value());
        frames.resize(1);
        frames.front().stack.clear();
        emit(TraceKind::SessionEnd, std::nullopt, data, 1);
    }

    // -- node execution ------------------------------------------------------

    void execute(Token t) {
        Frame& f = top();
        const Node& n = f.g->node(t.target.node);
        const Value input = *t.value;
        emit(TraceKind::NodeEnter, n.id, Value::Object{{"kind", n.type.name()}, {"input", input}});
        try {
            run_node(f, n, input);
        } catch (const Error& e) {
            if (status.terminal()) return;
            unwind(ErrorRecord{e.what(), n.id, e.code()}, n.id, true);
        }
    }

    void run_node(Frame& f, const Node& n, const Value& input) {
        switch (n.type.kind) {
            case NodeKind::Start:
            case NodeKind::Connector:
                if (n.type.kind == NodeKind::Connector) return run_connector(f, n, input);
                return finish_node(f, n, input, "out");
            case NodeKind::End: return run_end(f, n, input);
            case NodeKind::Prompt: {
                std::string text = templ(config_string(n, "template", "{payload}")).render(env_for(f, input));
                return finish_node(f, n, Value(text), "out");
            }
            case NodeKind::Code: return finish_node(f, n, run_code(f, n, input), "out");
            case NodeKind::LlmCall: return finish_node(f, n, Value(run_llm(f, n, input)), "out");
            case NodeKind::SubAgent: return run_subagent(f, n, input);
            case NodeKind::Tool:
            case NodeKind::Extension: return finish_node(f, n, run_component(f, n, input), "out");
            case NodeKind::Branch: return run_branch(f, n, input);
            case NodeKind::ArrayLoop: return run_loop(f, n, input);
            case NodeKind::Summary: return finish_node(f, n, merge_summary(f, n, input), "out");
            case NodeKind::ErrorHandler: return run_handler(f, n, input);
            case NodeKind::AskText:
            case NodeKind::AskChoice: return run_ask(f, n, input);
            case NodeKind::ShowMessage: {
                std::string text = templ(config_string(n, "text", "{payload}")).render(env_for(f, input));
                emit(TraceKind::Display, n.id, Value::Object{{"widget", "message"}, {"text", text}});
                return finish_node(f, n, input, "out");
            }
            case NodeKind::ShowChart: {
                Value series = expr(config_string(n, "series", "payload")).eval(env_for(f, input));
                if (!series.is_array()) throw Error("TypeMismatch", "chart series must be an array of numbers");
                for (const auto& x : series.as_array()) {
                    if (!x.is_number()) throw Error("TypeMismatch", "chart series must be an array of numbers");
                }
                Value::Object d{{"widget", "chart"}, {"series", series}};
                if (const Value* title = config_value(n, "title")) d.emplace("title", *title);
                emit(TraceKind::Display, n.id, d);
                return finish_node(f, n, input, "out");
            }
        }
    }

    void run_connector(Frame& f, const Node& n, const Value& input) {
        std::vector<std::pair<std::string, Emission>> ems;
        for (const auto& p : n.out_ports) {
            if (auto tgt = f.g->target(n.id, p)) ems.push_back({p, {*tgt, input}});
        }
        if (ems.empty()) throw Error("RouteMissing", "connector '" + n.id + "' has no wired output");
        exit_node(f, n, input, "");
        push_emissions(f, n.id, std::move(ems));
    }

    void run_end(Frame& f, const Node& n, const Value& input) {
        Value result = expr(config_string(n, "result", "payload")).eval(env_for(f, input));
        if (f.kind == FrameKind::LoopBody) throw Error("IllegalEnd", "End node reached inside a loop body");
        exit_node(f, n, result, "");
        if (f.kind == FrameKind::Root) {
            status.kind = StatusKind::Finished;
            status.result = result;
            end_session();
            return;
        }
        std::string owner = f.owner;
        pop_frame();
        Frame& parent = top();
        parent.waiting.clear();
        finish_node(parent, parent.g->node(owner), result, "out");
    }

    Value run_code(Frame& f, const Node& n, const Value& input) {
        if (const Value* ext = config_value(n, "external")) {
            const Value* cmd = ext->find("command");
            if (!cmd || !cmd->is_string()) throw Error("InvalidConfig", "external.command must be a string");
            int timeout = 5000;
            if (const Value* t = ext->find("timeout_ms"); t && t->is_number()) timeout = static_cast<int>(t->as_number());
            Value req = Value::Object{{"env", f.vars}, {"payload", input}};
            ProcessResult r = run_process(cmd->as_string(), to_json(req), timeout);
            if (r.timed_out) throw Error("ExternalFailed", "external command timed out after " + std::to_string(timeout) + " ms");
            if (r.exit_code != 0) {
                throw Error("ExternalFailed", "external command exited with " + std::to_string(r.exit_code) +
                                                  (r.err.empty() ? "" : ": " + r.err.substr(0, 200)));
            }
            try {
                return parse_json(r.out);
            } catch (const Error&) {
                throw Error("ExternalFailed", "external command printed malformed JSON");
            }
        }
        return expr(config_string(n, "expr", "payload")).eval(env_for(f, input));
    }

    std::string run_llm(Frame& f, const Node& n, const Value& input) {
        if (!services.gateway) throw Error("NoGateway", "no LLM gateway configured");
        auto env = env_for(f, input);
        llm::Request req;
        req.model = config_string(n, "model", "mock-model");
        std::string system = templ(config_string(n, "system", "")).render(env);
        if (!system.empty()) req.messages.push_back({"system", system});
        req.messages.push_back({"user", templ(config_string(n, "prompt", "{payload}")).render(env)});
        if (const Value* p = config_value(n, "params")) {
            if (!p->is_object()) throw Error("InvalidConfig", "params must be an object");
            if (const Value* t = p->find("temperature"); t && t->is_number()) req.params.temperature = t->as_number();
            if (const Value* m = p->find("max_tokens"); m && m->is_number()) {
                req.params.max_tokens = static_cast<long long>(m->as_number());
            }
            if (const Value* s = p->find("seed"); s && s->is_number()) req.params.seed = static_cast<long long>(s->as_number());
        }
        req.origin = {id, n.id, call_index++};
        llm::Response resp = services.gateway->complete(req, options.mode, rules);
        usage.add(resp, req);
        long long saved = (resp.source.kind == llm::SourceKind::Mimic || resp.source.kind == llm::SourceKind::Replay)
                              ? resp.usage.prompt_tokens + resp.usage.completion_tokens
                              : 0;
        Value::Object data{{"source", std::string(llm::to_string(resp.source.kind))},
                           {"model", req.model},
                           {"call_index", req.origin.call_index},
                           {"fingerprint", llm::fingerprint(req)},
                           {"usage", Value::Object{{"prompt_tokens", resp.usage.prompt_tokens},
                                                   {"completion_tokens", resp.usage.completion_tokens}}},
                           {"saved_tokens", saved}};
        if (!resp.source.id.empty()) data.emplace("source_id", resp.source.id);
        emit(TraceKind::LlmCall, n.id, data);
        return resp.content;
    }

    Value run_component(Frame& f, const Node& n, const Value& input) {
        if (!services.plugins) throw Error("UnknownComponent", "no plugin registry configured");
        std::string ns, name;
        if (n.type.kind == NodeKind::Extension) {
            ns = n.type.plugin_namespace;
            name = n.type.component;
        } else {
            std::string comp = config_string(n, "component", "");
            auto slash = comp.find('/');
            if (slash == std::string::npos) throw Error("InvalidConfig", "component must be 'namespace/name'");
            ns = comp.substr(0, slash);
            name = comp.substr(slash + 1);
        }
        Value arg = input;
        if (const Value* args = config_value(n, "args")) {
            if (!args->is_object()) throw Error("InvalidConfig", "args must be an object of scriptlets");
            auto env = env_for(f, input);
            Value::Object evaluated;
            for (const auto& [k, src] : args->as_object()) {
                if (!src.is_string()) throw Error("InvalidConfig", "args." + k + " must be a scriptlet string");
                evaluated[k] = expr(src.as_string()).eval(env);
            }
            arg = Value(std::move(evaluated));
        }
        plugins::ComponentContext ctx{id, n.id, scratch[ns]};
        return services.plugins->invoke_component(ns, name, n.config, arg, ctx);
    }

    void run_subagent(Frame& f, const Node& n, const Value& input) {
        std::string name = config_string(n, "graph", "");
        auto g = services.library ? services.library->find(name) : nullptr;
        if (!g) throw Error("UnknownGraph", "no graph named '" + name + "'");
        if (frames.size() >= 64) throw Error("DepthExceeded", "sub-agent nesting deeper than 64 frames");
        f.waiting = n.id;
        auto compiled = std::make_shared<const Compiled>(g);
        Token t;
        t.target = PortRef{g->entry, ""};
        t.value = input;
        push_frame(compiled, FrameKind::SubAgent, n.id, 0, {}, std::move(t));
    }

    void run_branch(Frame& f, const Node& n, const Value& input) {
        std::string chosen = "else";
        if (const Value* cases = config_value(n, "cases")) {
            if (!cases->is_array()) throw Error("InvalidConfig", "cases must be an array");
            auto env = env_for(f, input);
            for (const auto& c : cases->as_array()) {
                const Value* port = c.find("port");
                const Value* cond = c.find("cond");
                if (!port || !port->is_string() || !cond || !cond->is_string()) {
                    throw Error("InvalidConfig", "each case needs string 'port' and 'cond'");
                }
                Value v = expr(cond->as_string()).eval(env);
                if (!v.is_bool()) throw Error("TypeMismatch", "branch condition must be Bool, got " +
                                                                  std::string(type_name(v.type())));
                if (v.as_bool()) {
                    chosen = port->as_string();
                    break;
                }
            }
        }
        if (!f.g->target(n.id, chosen)) throw Error("RouteMissing", "branch port '" + chosen + "' is not wired");
        std::vector<std::pair<std::string, Emission>> ems;
        for (const auto& p : n.out_ports) {
            auto tgt = f.g->target(n.id, p);
            if (!tgt) continue;
            ems.push_back({p, {*tgt, p == chosen ? std::optional<Value>(input) : std::nullopt}});
        }
        exit_node(f, n, input, chosen);
        push_emissions(f, n.id, std::move(ems));
    }

    void run_loop(Frame& f, const Node& n, const Value& input) {
        if (!input.is_array()) {
            throw Error("TypeMismatch", "ArrayLoop input must be Array, got " + std::string(type_name(input.type())));
        }
        if (input.as_array().empty() || !f.g->target(n.id, "body")) return finish_node(f, n, input, "done");
        f.waiting = n.id;
        f.loop = LoopState{n.id, input.as_array(), {}, 0};
        push_loop_iteration(f);
    }

    Value merge_summary(Frame& f, const Node& n, const Value& inputs) {
        std::string mode = config_string(n, "mode", "collect_array");
        if (mode == "collect_array") return inputs;
        if (mode == "concat_text") {
            std::string sep = config_string(n, "separator", "\n");
            std::string out;
            bool first = true;
            auto add = [&](const Value& v) {
                if (!first) out += sep;
                first = false;
                out += scriptlet::to_display_string(v);
            };
            for (const auto& v : inputs.as_array()) {
                if (v.is_array()) {
                    for (const auto& e : v.as_array()) add(e);
                } else {
                    add(v);
                }
            }
            return Value(out);
        }
        if (mode == "template") {
            auto env = env_for(f, inputs);
            env["inputs"] = inputs;
            return Value(templ(config_string(n, "template", "{json(payload)}")).render(env));
        }
        throw Error("InvalidConfig", "unknown summary mode '" + mode + "'");
    }

    void run_handler(Frame& f, const Node& n, const Value& input) {
        auto tgt = f.g->target(n.id, "try");
        if (!tgt) throw Error("RouteMissing", "port 'try' of '" + n.id + "' is not wired");
        exit_node(f, n, input, "try");
        std::size_t mark = f.stack.size();
        Token marker;
        marker.kind = TokKind::HandlerExit;
        marker.target = PortRef{n.id, ""};
        f.stack.push_back(std::move(marker));
        f.handlers.push_back(Handler{n.id, mark});
        push_emissions(f, n.id, {{"try", {*tgt, input}}});
    }

    void run_ask(Frame& f, const Node& n, const Value& input) {
        auto env = env_for(f, input);
        Value::Object prompt{{"question", templ(config_string(n, "question", "{payload}")).render(env)}};
        if (n.type.kind == NodeKind::AskChoice) {
            const Value* opts = config_value(n, "options");
            Value options = opts ? (opts->is_string() ? expr(opts->as_string()).eval(env) : *opts) : Value::Array{};
            if (!options.is_array() || options.as_array().empty()) {
                throw Error("InvalidConfig", "AskChoice options must be a non-empty array of strings");
            }
            for (const auto& o : options.as_array()) {
                if (!o.is_string()) throw Error("InvalidConfig", "AskChoice options must be strings");
            }
            prompt.emplace("widget", "choice");
            prompt.emplace("options", options);
        } else {
            prompt.emplace("widget", "text");
        }
        status.kind = StatusKind::AwaitingInput;
        status.node = n.id;
        status.prompt = Value(prompt);
    }

    // -- outcome ---------------------------------------------------------------

    StepOutcome outcome_after(const std::string& executed) {
        StepOutcome o;
        switch (status.kind) {
            case StatusKind::Finished:
                o.kind = OutcomeKind::Done;
                o.value = status.result;
                return o;
            case StatusKind::Failed:
                o.kind = OutcomeKind::Error;
                o.node = status.error.node;
                o.error = status.error;
                return o;
            case StatusKind::AwaitingInput:
                o.kind = OutcomeKind::NeedsInput;
                o.node = status.node;
                o.value = status.prompt;
                return o;
            default: break;
        }
        std::string next = next_node();
        if (options.honor_breakpoints && !next.empty() && options.breakpoints.count(next)) {
            pause_at(next, true);
            o.kind = OutcomeKind::Paused;
            o.node = next;
            return o;
        }
        o.kind = OutcomeKind::Advanced;
        o.node = executed;
        return o;
    }

    void pause_at(const std::string& node, bool breakpoint) {
        status.kind = StatusKind::PausedBreakpoint;
        status.node = node;
        if (breakpoint) emit(TraceKind::BreakpointHit, node);
    }

    std::string next_node() const {
        if (frames.empty() || status.terminal() || status.kind == StatusKind::AwaitingInput) return {};
        const Frame& f = frames.back();
        if (f.stack.empty()) return {};
        return f.stack.back().target.node;
    }
};

// ---------------------------------------------------------------------------

Session::Session(std::shared_ptr<const TopologyGraph> graph, Value input, SessionOptions options, Services services)
    : impl_(std::make_unique<Impl>()) {
    auto& s = *impl_;
    s.graph = std::move(graph);
    s.options = std::move(options);
    s.services = services;
    s.rules = s.options.mimic_profile;
    s.id = s.options.session_id ? *s.options.session_id : IdGenerator().next();
    s.started_at = s.now();
    Frame root;
    root.g = std::make_shared<const Compiled>(s.graph);
    Token t;
    t.target = PortRef{s.graph->entry, ""};
    t.value = input;
    root.stack.push_back(std::move(t));
    s.frames.push_back(std::move(root));
    s.emit(TraceKind::SessionStart, std::nullopt,
           Value::Object{{"graph", s.graph->name}, {"input", input}, {"session", s.id}});
}

Session::~Session() = default;

const std::string& Session::id() const noexcept { return impl_->id; }
const TopologyGraph& Session::graph() const noexcept { return *impl_->graph; }
const Status& Session::status() const noexcept { return impl_->status; }
const std::vector<TraceEvent>& Session::trace() const noexcept { return impl_->trace; }
const llm::UsageTotals& Session::usage() const noexcept { return impl_->usage; }
const std::set<std::string>& Session::breakpoints() const noexcept { return impl_->options.breakpoints; }
long long Session::started_at() const noexcept { return impl_->started_at; }
std::optional<long long> Session::ended_at() const noexcept { return impl_->ended_at; }

void Session::set_breakpoint(const std::string& node) {
    if (!impl_->graph->find_node(node)) {
        bool found = false;
        if (impl_->services.library) {
            for (const auto& name : impl_->services.library->names()) {
                found = found || impl_->services.library->find(name)->find_node(node);
            }
        }
        if (!found) throw Error("UnknownNode", "no node '" + node + "'");
    }
    impl_->options.breakpoints.insert(node);
}

void Session::clear_breakpoint(const std::string& node) { impl_->options.breakpoints.erase(node); }

void Session::add_mimic_rule(llm::MimicRule rule) {
    for (auto& r : impl_->rules) {
        if (r.id == rule.id) {
            r = std::move(rule);
            return;
        }
    }
    impl_->rules.push_back(std::move(rule));
}

void Session::clear_mimic_rules() { impl_->rules.clear(); }

StepOutcome Session::step() {
    auto& s = *impl_;
    if (s.status.terminal()) throw Error("IllegalState", "session is " + std::string(to_string(s.status.kind)));
    if (s.status.kind == StatusKind::AwaitingInput) throw Error("IllegalState", "session is awaiting input");
    if (s.status.kind == StatusKind::Ready) {
        s.advance();
        if (s.status.terminal()) return s.outcome_after("");
        std::string next = s.next_node();
        if (s.options.honor_breakpoints && s.options.breakpoints.count(next)) {
            s.pause_at(next, true);
            StepOutcome o;
            o.kind = OutcomeKind::Paused;
            o.node = next;
            return o;
        }
    }
    s.status.kind = StatusKind::Running;
    s.advance();
    if (s.status.terminal()) return s.outcome_after("");
    Token t = std::move(s.top().stack.back());
    s.top().stack.pop_back();
    std::string executed = t.target.node;
    s.execute(std::move(t));
    s.advance();
    return s.outcome_after(executed);
}

StepOutcome Session::provide_input(const Value& value) {
    auto& s = *impl_;
    if (s.status.kind != StatusKind::AwaitingInput) {
        throw Error("IllegalState", "session is " + std::string(to_string(s.status.kind)) + ", not awaiting input");
    }
    if (const Value* opts = s.status.prompt.find("options")) {
        bool ok = false;
        for (const auto& o : opts->as_array()) ok = ok || o == value;
        if (!ok) throw Error("InvalidChoice", to_json(value) + " is not one of " + to_json(*opts));
    }
    std::string node = s.status.node;
    s.status.kind = StatusKind::Running;
    s.status.prompt = Value();
    Frame& f = s.top();
    try {
        s.finish_node(f, f.g->node(node), value, "out");
    } catch (const Error& e) {
        s.unwind(ErrorRecord{e.what(), node, e.code()}, node, true);
    }
    s.advance();
    return s.outcome_after(node);
}

Value Session::run_to_completion(const std::function<Value(const Value& prompt)>& input_provider) {
    auto& s = *impl_;
    bool saved = s.options.honor_breakpoints;
    s.options.honor_breakpoints = false;
    while (!s.status.terminal()) {
        if (s.status.kind == StatusKind::AwaitingInput) {
            if (!input_provider) {
                s.options.honor_breakpoints = saved;
                throw Error("IllegalState", "session awaits input and no input provider was given");
            }
            provide_input(input_provider(s.status.prompt));
        } else {
            step();
        }
    }
    s.options.honor_breakpoints = saved;
    if (s.status.kind == StatusKind::Failed) throw SessionFailed(s.status.error);
    return s.status.result;
}

void Session::pause_here() {
    auto& s = *impl_;
    if (s.status.kind != StatusKind::Running && s.status.kind != StatusKind::Ready) return;
    std::string next = s.next_node();
    if (!next.empty()) s.pause_at(next, false);
}

int Session::depth() const noexcept { return impl_->depth(); }

std::string Session::current_node() const {
    auto& s = *impl_;
    if (s.status.kind == StatusKind::AwaitingInput) return s.status.node;
    if (s.status.kind == StatusKind::Ready) {
        // The entry token is the only pending token before the first step.
        return s.frames.back().stack.empty() ? std::string() : s.frames.back().stack.back().target.node;
    }
    return s.next_node();
}

bool Session::next_opens_frame() const {
    auto& s = *impl_;
    std::string next = current_node();
    if (next.empty() || s.status.kind == StatusKind::AwaitingInput) return false;
    const Frame& f = s.frames.back();
    const Node& n = f.g->node(next);
    if (n.type.kind == NodeKind::SubAgent) return true;
    if (n.type.kind == NodeKind::ArrayLoop) {
        const Token& t = f.stack.back();
        return t.value && t.value->is_array() && !t.value->as_array().empty() && f.g->target(n.id, "body");
    }
    return false;
}

std::vector<FrameView> Session::frames() const {
    auto& s = *impl_;
    std::vector<FrameView> out;
    for (std::size_t i = 0; i < s.frames.size(); ++i) {
        const Frame& f = s.frames[i];
        FrameView v;
        v.kind = f.kind;
        v.owner = f.owner;
        v.index = f.index;
        v.graph = f.g->graph->name;
        v.env = f.vars;
        if (!f.waiting.empty()) {
            v.node = f.waiting;
        } else if (i + 1 == s.frames.size()) {
            if (s.status.kind == StatusKind::AwaitingInput) {
                v.node = s.status.node;
            } else if (!f.stack.empty() && !s.status.terminal()) {
                const Token& t = f.stack.back();
                v.node = t.target.node;
                if (t.value) v.env["payload"] = *t.value;
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

Value Session::inspect() const {
    Value::Array frames_v;
    for (const auto& f : frames()) {
        Value::Object o{{"kind", std::string(to_string(f.kind))}, {"node", f.node}, {"env", f.env},
                        {"graph", f.graph}};
        if (f.kind != FrameKind::Root) o.emplace("owner", f.owner);
        if (f.kind == FrameKind::LoopBody) o.emplace("index", f.index);
        frames_v.push_back(std::move(o));
    }
    Value::Array bps;
    for (const auto& b : breakpoints()) bps.push_back(b);
    return Value::Object{{"session", id()},
                         {"frames", frames_v},
                         {"frame_depth", depth()},
                         {"breakpoints", bps},
                         {"usage", usage().to_value()},
                         {"status", status().to_value()}};
}

Value Session::export_trace() const {
    Value::Array events;
    for (const auto& e : trace()) events.push_back(event_to_value(e));
    return Value::Object{{"session", id()}, {"graph_name", graph().name}, {"events", events}};
}

void Session::set_listener(std::function<void(const TraceEvent&)> listener) { impl_->listener = std::move(listener); }

std::unique_ptr<Session> start_session(std::shared_ptr<const TopologyGraph> graph, Value input,
                                       SessionOptions options, Services services) {
    auto report = validate(*graph, services.plugins);
    if (!report.ok) {
        const auto& first = report.issues.front();
        throw Error("InvalidGraph", std::string(to_string(first.code)) + " " + first.ref + ": " + first.message);
    }
    return std::make_unique<Session>(std::move(graph), std::move(input), std::move(options), services);
}

std::string trace_to_text(const Value& doc) {
    std::string out = "{\"session\":";
    const Value* s = doc.find("session");
    write_json(out, s ? *s : Value());
    out += ",\"graph_name\":";
    const Value* g = doc.find("graph_name");
    write_json(out, g ? *g : Value());
    out += ",\"events\":[";
    const Value* events = doc.find("events");
    if (events && events->is_array()) {
        const auto& arr = events->as_array();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            out += i ? ",\n" : "\n";
            write_json(out, arr[i]);
        }
        if (!arr.empty()) out += "\n";
    }
    out += "]}\n";
    return out;
}

IdGenerator::IdGenerator(std::optional<std::uint64_t> seed) : rng_(seed ? *seed : std::random_device{}()) {
    if (!seed) rng_.seed((static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}());
}

std::string IdGenerator::next() {
    std::lock_guard lock(mu_);
    std::uint64_t hi = rng_(), lo = rng_();
    hi = (hi & 0xFFFFFFFFFFFF0FFFULL) | 0x0000000000004000ULL;
    lo = (lo & 0x3FFFFFFFFFFFFFFFULL) | 0x8000000000000000ULL;
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    for (int i = 0; i < 32; ++i) {
        std::uint64_t word = i < 16 ? hi : lo;
        int shift = 60 - 4 * (i % 16);
        s.push_back(hex[(word >> shift) & 0xF]);
        if (i == 7 || i == 11 || i == 15 || i == 19) s.push_back('-');
    }
    return s;
}

SessionManager::SessionManager(Services services, std::optional<std::uint64_t> seed)
    : services_(services), ids_(seed) {}

std::shared_ptr<SessionManager::Entry> SessionManager::create(std::shared_ptr<const TopologyGraph> graph, Value input,
                                                              SessionOptions options) {
    if (!options.session_id) options.session_id = ids_.next();
    auto entry = std::make_shared<Entry>();
    entry->session = start_session(std::move(graph), std::move(input), std::move(options), services_);
    std::lock_guard lock(mu_);
    sessions_[entry->session->id()] = entry;
    order_.push_back(entry->session->id());
    return entry;
}

std::shared_ptr<SessionManager::Entry> SessionManager::get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error("UnknownSession", "no session '" + id + "'");
    return it->second;
}

std::vector<std::string> SessionManager::ids() const {
    std::lock_guard lock(mu_);
    return order_;
}

llm::UsageTotals SessionManager::usage_totals(const std::string& id) const {
    auto e = get(id);
    std::lock_guard lock(e->mu);
    return e->session->usage();
}

}  // namespace aad::runtime
