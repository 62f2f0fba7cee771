#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aad/value.hpp"

namespace aad {

/// Anything that can answer whether a plugin component exists.
class ComponentCatalog {
public:
    virtual ~ComponentCatalog() = default;
    virtual bool has_component(std::string_view ns, std::string_view name) const = 0;
};

enum class NodeKind {
    // chain
    LlmCall,
    Prompt,
    Code,
    SubAgent,
    Tool,
    // flow control
    Start,
    End,
    Connector,
    Branch,
    ArrayLoop,
    Summary,
    ErrorHandler,
    // interaction
    AskText,
    AskChoice,
    ShowMessage,
    ShowChart,
    // plugin-provided component
    Extension,
};

/// A node's kind. Extension kinds additionally name a plugin component and are
/// spelled `ext:<namespace>/<name>` in every textual form.
struct NodeType {
    NodeKind kind = NodeKind::Connector;
    std::string plugin_namespace;
    std::string component;

    NodeType() = default;
    NodeType(NodeKind k) : kind(k) {}  // NOLINT(google-explicit-constructor)
    static NodeType extension(std::string ns, std::string name);

    std::string name() const;
    /// Throws Error("SchemaError") for unknown spellings.
    static NodeType parse(std::string_view text);

    friend bool operator==(const NodeType&, const NodeType&) = default;
};

struct Layout {
    double x = 0;
    double y = 0;
    friend bool operator==(const Layout&, const Layout&) = default;
};

struct Node {
    std::string id;
    NodeType type;
    Value::Object config;
    std::vector<std::string> in_ports;
    std::vector<std::string> out_ports;
    std::optional<Layout> layout;

    bool has_in_port(std::string_view p) const;
    bool has_out_port(std::string_view p) const;

    friend bool operator==(const Node&, const Node&) = default;
};

struct PortRef {
    std::string node;
    std::string port;
    friend auto operator<=>(const PortRef&, const PortRef&) = default;
};

struct Edge {
    PortRef from;
    PortRef to;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Default port lists implied by a node's kind (and, for Branch, its `cases`).
std::pair<std::vector<std::string>, std::vector<std::string>> default_ports(const NodeType& type,
                                                                           const Value::Object& config);

/// Builds a node with default ports.
Node make_node(std::string id, NodeType type, Value::Object config = {}, std::optional<Layout> layout = {});

bool is_valid_identifier(std::string_view id);

inline constexpr std::string_view kLoopbackPort = "loopback";

struct TopologyGraph {
    int schema_version = 1;
    std::string name;
    std::string entry;
    std::vector<Node> nodes;
    std::vector<Edge> edges;

    const Node* find_node(std::string_view id) const;
    Node* find_node(std::string_view id);

    /// Nodes sorted by id and edges sorted by (from, to).
    TopologyGraph normalized() const;

    /// Structural equality independent of node/edge storage order.
    friend bool operator==(const TopologyGraph& a, const TopologyGraph& b);
};

enum class IssueCode {
    MissingEntry,
    MissingEnd,
    DuplicateId,
    InvalidNode,
    DanglingEdge,
    IllegalCycle,
    UnreachableNode,
    UnknownExtension,
    FanoutViolation,
};

std::string_view to_string(IssueCode c);

struct ValidationIssue {
    IssueCode code;
    std::string ref;  // node id or "a.out->b.in"
    std::string message;
};

struct ValidationReport {
    bool ok = true;
    std::vector<ValidationIssue> issues;

    bool has(IssueCode c) const;
};

std::string edge_label(const Edge& e);

/// Checks every structural invariant. Never throws. Extension kinds are
/// resolved against `catalog`; with no catalog every Extension is unknown.
ValidationReport validate(const TopologyGraph& graph, const ComponentCatalog* catalog = nullptr);

namespace edit {
struct AddNode {
    Node node;
    friend bool operator==(const AddNode&, const AddNode&) = default;
};
struct RemoveNode {
    std::string id;
    friend bool operator==(const RemoveNode&, const RemoveNode&) = default;
};
struct Connect {
    Edge edge;
    friend bool operator==(const Connect&, const Connect&) = default;
};
struct Disconnect {
    Edge edge;
    friend bool operator==(const Disconnect&, const Disconnect&) = default;
};
/// A Null value removes the key.
struct SetConfig {
    std::string id;
    std::string key;
    Value value;
    friend bool operator==(const SetConfig&, const SetConfig&) = default;
};
struct MoveNode {
    std::string id;
    double x = 0;
    double y = 0;
    friend bool operator==(const MoveNode&, const MoveNode&) = default;
};
}  // namespace edit

using GraphEdit = std::variant<edit::AddNode, edit::RemoveNode, edit::Connect, edit::Disconnect, edit::SetConfig,
                               edit::MoveNode>;

std::string describe(const GraphEdit& e);
Value edit_to_value(const GraphEdit& e);

/// Returns a new graph with `e` applied. Throws Error with code UnknownNode,
/// DuplicateNode, DuplicateEdge or UnknownEdge.
TopologyGraph apply_edit(const TopologyGraph& graph, const GraphEdit& e);

/// The unique edge target wired to (node, port), if any.
/// Throws Error("UnknownNode") / Error("UnknownPort").
std::optional<PortRef> next_hop(const TopologyGraph& graph, std::string_view node, std::string_view port);

/// Nodes guarded by each ErrorHandler: everything reachable from its "try"
/// port minus everything reachable from its "catch" port.
std::map<std::string, std::set<std::string>> error_regions(const TopologyGraph& graph);

/// Node ids in topological order over non-loopback edges, Start first,
/// ties broken by id. Nodes on illegal cycles are appended in id order.
std::vector<std::string> topological_order(const TopologyGraph& graph);

}  // namespace aad
