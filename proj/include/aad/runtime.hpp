#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "aad/graph.hpp"
#include "aad/llm.hpp"
#include "aad/plugins.hpp"
#include "aad/value.hpp"

namespace aad::runtime {

enum class TraceKind {
    SessionStart,
    NodeEnter,
    NodeExit,
    VarUpdate,
    LlmCall,
    Display,
    BreakpointHit,
    FramePush,
    FramePop,
    ErrorRaised,
    ErrorCaught,
    SessionEnd,
};

std::string_view to_string(TraceKind k);
TraceKind parse_trace_kind(std::string_view s);

struct TraceEvent {
    long long seq = 0;
    long long ts = 0;
    TraceKind kind = TraceKind::SessionStart;
    std::optional<std::string> node;
    int frame_depth = 1;
    Value data = Value::Object{};
};

Value event_to_value(const TraceEvent& e);
TraceEvent event_from_value(const Value& v);

/// Graphs addressable by name from SubAgent nodes.
class GraphLibrary {
public:
    void add(std::shared_ptr<const TopologyGraph> graph);
    std::shared_ptr<const TopologyGraph> find(std::string_view name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, std::shared_ptr<const TopologyGraph>, std::less<>> graphs_;
};

/// Shared collaborators; all pointers are optional and non-owning.
struct Services {
    const GraphLibrary* library = nullptr;
    llm::Gateway* gateway = nullptr;
    const plugins::PluginRegistry* plugins = nullptr;
};

struct ErrorRecord {
    std::string message;
    std::string node;
    std::string kind;

    Value to_value() const;
};

enum class StatusKind { Ready, Running, PausedBreakpoint, AwaitingInput, Finished, Failed };
std::string_view to_string(StatusKind k);

struct Status {
    StatusKind kind = StatusKind::Ready;
    std::string node;  // PausedBreakpoint / AwaitingInput
    Value prompt;      // AwaitingInput: {widget, question, options?}
    Value result;      // Finished
    ErrorRecord error; // Failed

    bool terminal() const { return kind == StatusKind::Finished || kind == StatusKind::Failed; }
    Value to_value() const;
};

enum class OutcomeKind { Advanced, Paused, NeedsInput, Done, Error };
std::string_view to_string(OutcomeKind k);

struct StepOutcome {
    OutcomeKind kind = OutcomeKind::Advanced;
    std::string node;
    Value value;  // Done: result; NeedsInput: prompt
    ErrorRecord error;

    Value to_value() const;
};

enum class FrameKind { Root, SubAgent, LoopBody };
std::string_view to_string(FrameKind k);

struct FrameView {
    FrameKind kind = FrameKind::Root;
    std::string owner;   // SubAgent / ArrayLoop node in the parent frame
    long long index = 0; // LoopBody iteration
    std::string graph;
    std::string node;    // next node to run, or the node waiting on the child frame
    Value::Object env;
};

struct SessionOptions {
    std::set<std::string> breakpoints;
    /// Pause before breakpoint nodes in step(). run_to_completion never pauses.
    bool honor_breakpoints = true;
    llm::Mode mode = llm::Mode::MimicFirst;
    std::vector<llm::MimicRule> mimic_profile;
    std::optional<std::string> session_id;
    std::function<long long()> clock;
};

/// Raised by run_to_completion when the session fails.
class SessionFailed : public Error {
public:
    explicit SessionFailed(ErrorRecord rec)
        : Error(rec.kind, rec.message + (rec.node.empty() ? "" : " at " + rec.node)), record_(std::move(rec)) {}
    const ErrorRecord& record() const noexcept { return record_; }

private:
    ErrorRecord record_;
};

class Session {
public:
    Session(std::shared_ptr<const TopologyGraph> graph, Value input, SessionOptions options, Services services);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    const std::string& id() const noexcept;
    const TopologyGraph& graph() const noexcept;
    const Status& status() const noexcept;
    const std::vector<TraceEvent>& trace() const noexcept;
    const llm::UsageTotals& usage() const noexcept;
    const std::set<std::string>& breakpoints() const noexcept;
    long long started_at() const noexcept;
    std::optional<long long> ended_at() const noexcept;

    void set_breakpoint(const std::string& node);
    void clear_breakpoint(const std::string& node);
    void add_mimic_rule(llm::MimicRule rule);
    void clear_mimic_rules();

    /// Executes one node. Throws Error("IllegalState") on terminal or
    /// input-awaiting sessions.
    StepOutcome step();
    /// Throws IllegalState or InvalidChoice (status unchanged).
    StepOutcome provide_input(const Value& value);
    /// Steps until terminal, ignoring breakpoints. Throws SessionFailed.
    Value run_to_completion(const std::function<Value(const Value& prompt)>& input_provider);

    /// Marks a Running session as paused before its next node.
    void pause_here();

    int depth() const noexcept;
    /// Node the next step() will execute; empty when none.
    std::string current_node() const;
    /// Whether the next node opens a child frame (SubAgent, non-empty ArrayLoop).
    bool next_opens_frame() const;
    std::vector<FrameView> frames() const;
    Value inspect() const;

    /// {session, graph_name, events}
    Value export_trace() const;

    /// Called synchronously for every appended trace event.
    void set_listener(std::function<void(const TraceEvent&)> listener);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Throws Error("InvalidGraph").
std::unique_ptr<Session> start_session(std::shared_ptr<const TopologyGraph> graph, Value input,
                                       SessionOptions options, Services services);

/// Canonical trace log text: one event per line.
std::string trace_to_text(const Value& trace_doc);

/// UUID-format identifiers; deterministic when seeded.
class IdGenerator {
public:
    explicit IdGenerator(std::optional<std::uint64_t> seed = std::nullopt);
    std::string next();

private:
    std::mutex mu_;
    std::mt19937_64 rng_;
};

/// Registry of live sessions. Each entry carries the mutex that serializes
/// commands on that session.
class SessionManager {
public:
    struct Entry {
        std::mutex mu;
        std::unique_ptr<Session> session;
    };

    explicit SessionManager(Services services, std::optional<std::uint64_t> seed = std::nullopt);

    std::shared_ptr<Entry> create(std::shared_ptr<const TopologyGraph> graph, Value input, SessionOptions options);
    /// Throws Error("UnknownSession").
    std::shared_ptr<Entry> get(const std::string& id) const;
    std::vector<std::string> ids() const;
    llm::UsageTotals usage_totals(const std::string& id) const;
    const Services& services() const { return services_; }

private:
    Services services_;
    IdGenerator ids_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::vector<std::string> order_;
};

}  // namespace aad::runtime
