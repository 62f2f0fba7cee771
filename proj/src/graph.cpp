#include "aad/graph.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <queue>

namespace aad {

namespace {

constexpr std::array<std::pair<NodeKind, std::string_view>, 16> kKindNames{{
    {NodeKind::LlmCall, "LlmCall"},
    {NodeKind::Prompt, "Prompt"},
    {NodeKind::Code, "Code"},
    {NodeKind::SubAgent, "SubAgent"},
    {NodeKind::Tool, "Tool"},
    {NodeKind::Start, "Start"},
    {NodeKind::End, "End"},
    {NodeKind::Connector, "Connector"},
    {NodeKind::Branch, "Branch"},
    {NodeKind::ArrayLoop, "ArrayLoop"},
    {NodeKind::Summary, "Summary"},
    {NodeKind::ErrorHandler, "ErrorHandler"},
    {NodeKind::AskText, "AskText"},
    {NodeKind::AskChoice, "AskChoice"},
    {NodeKind::ShowMessage, "ShowMessage"},
    {NodeKind::ShowChart, "ShowChart"},
}};

bool is_namespace(std::string_view ns) {
    if (ns.empty() || ns[0] < 'a' || ns[0] > 'z') return false;
    return std::all_of(ns.begin(), ns.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

bool contains(const std::vector<std::string>& v, std::string_view s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

NodeType NodeType::extension(std::string ns, std::string name) {
    NodeType t(NodeKind::Extension);
    t.plugin_namespace = std::move(ns);
    t.component = std::move(name);
    return t;
}

std::string NodeType::name() const {
    if (kind == NodeKind::Extension) return "ext:" + plugin_namespace + "/" + component;
    for (const auto& [k, n] : kKindNames) {
        if (k == kind) return std::string(n);
    }
    return "?";
}

NodeType NodeType::parse(std::string_view text) {
    for (const auto& [k, n] : kKindNames) {
        if (n == text) return NodeType(k);
    }
    if (text.starts_with("ext:")) {
        auto rest = text.substr(4);
        auto slash = rest.find('/');
        if (slash != std::string_view::npos) {
            auto ns = rest.substr(0, slash);
            auto comp = rest.substr(slash + 1);
            if (is_namespace(ns) && is_valid_identifier(comp)) {
                return NodeType::extension(std::string(ns), std::string(comp));
            }
        }
    }
    throw Error("SchemaError", "unknown node kind '" + std::string(text) + "'");
}

bool Node::has_in_port(std::string_view p) const { return contains(in_ports, p); }
bool Node::has_out_port(std::string_view p) const { return contains(out_ports, p); }

std::pair<std::vector<std::string>, std::vector<std::string>> default_ports(const NodeType& type,
                                                                           const Value::Object& config) {
    switch (type.kind) {
        case NodeKind::Start: return {{}, {"out"}};
        case NodeKind::End: return {{"in"}, {}};
        case NodeKind::ArrayLoop: return {{"in", std::string(kLoopbackPort)}, {"body", "done"}};
        case NodeKind::ErrorHandler: return {{"in"}, {"try", "catch"}};
        case NodeKind::Branch: {
            std::vector<std::string> outs{"then", "else"};
            if (auto it = config.find("cases"); it != config.end() && it->second.is_array()) {
                for (const auto& c : it->second.as_array()) {
                    const Value* port = c.find("port");
                    if (port && port->is_string() && !contains(outs, port->as_string())) {
                        outs.push_back(port->as_string());
                    }
                }
            }
            return {{"in"}, outs};
        }
        default: return {{"in"}, {"out"}};
    }
}

Node make_node(std::string id, NodeType type, Value::Object config, std::optional<Layout> layout) {
    Node n;
    n.id = std::move(id);
    auto [ins, outs] = default_ports(type, config);
    n.type = std::move(type);
    n.config = std::move(config);
    n.in_ports = std::move(ins);
    n.out_ports = std::move(outs);
    n.layout = layout;
    return n;
}

bool is_valid_identifier(std::string_view id) {
    if (id.empty()) return false;
    auto head = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
    if (!head(id[0])) return false;
    return std::all_of(id.begin() + 1, id.end(), [&](char c) { return head(c) || (c >= '0' && c <= '9'); });
}

const Node* TopologyGraph::find_node(std::string_view id) const {
    for (const auto& n : nodes) {
        if (n.id == id) return &n;
    }
    return nullptr;
}

Node* TopologyGraph::find_node(std::string_view id) {
    for (auto& n : nodes) {
        if (n.id == id) return &n;
    }
    return nullptr;
}

TopologyGraph TopologyGraph::normalized() const {
    TopologyGraph g = *this;
    std::stable_sort(g.nodes.begin(), g.nodes.end(), [](const Node& a, const Node& b) { return a.id < b.id; });
    std::stable_sort(g.edges.begin(), g.edges.end());
    return g;
}

bool operator==(const TopologyGraph& a, const TopologyGraph& b) {
    if (a.schema_version != b.schema_version || a.name != b.name || a.entry != b.entry) return false;
    if (a.nodes.size() != b.nodes.size() || a.edges.size() != b.edges.size()) return false;
    auto na = a.normalized();
    auto nb = b.normalized();
    return na.nodes == nb.nodes && na.edges == nb.edges;
}

std::string_view to_string(IssueCode c) {
    switch (c) {
        case IssueCode::MissingEntry: return "MissingEntry";
        case IssueCode::MissingEnd: return "MissingEnd";
        case IssueCode::DuplicateId: return "DuplicateId";
        case IssueCode::InvalidNode: return "InvalidNode";
        case IssueCode::DanglingEdge: return "DanglingEdge";
        case IssueCode::IllegalCycle: return "IllegalCycle";
        case IssueCode::UnreachableNode: return "UnreachableNode";
        case IssueCode::UnknownExtension: return "UnknownExtension";
        case IssueCode::FanoutViolation: return "FanoutViolation";
    }
    return "?";
}

bool ValidationReport::has(IssueCode c) const {
    return std::any_of(issues.begin(), issues.end(), [c](const auto& i) { return i.code == c; });
}

std::string edge_label(const Edge& e) {
    return e.from.node + "." + e.from.port + "->" + e.to.node + "." + e.to.port;
}

namespace {

struct Adjacency {
    std::map<std::string, std::vector<std::string>> succ;  // all usable edges
    std::map<std::string, std::vector<std::string>> pred;
    std::map<std::string, std::vector<std::string>> dag_succ;  // loopback edges excluded
};

std::set<std::string> reach(const std::map<std::string, std::vector<std::string>>& adj,
                            const std::vector<std::string>& seeds) {
    std::set<std::string> seen;
    std::deque<std::string> work(seeds.begin(), seeds.end());
    while (!work.empty()) {
        auto cur = std::move(work.front());
        work.pop_front();
        if (!seen.insert(cur).second) continue;
        if (auto it = adj.find(cur); it != adj.end()) {
            for (const auto& n : it->second) {
                if (!seen.count(n)) work.push_back(n);
            }
        }
    }
    return seen;
}

bool is_loopback(const TopologyGraph& g, const Edge& e) {
    if (e.to.port != kLoopbackPort) return false;
    const Node* n = g.find_node(e.to.node);
    return n && n->type.kind == NodeKind::ArrayLoop;
}

}  // namespace

ValidationReport validate(const TopologyGraph& graph, const ComponentCatalog* catalog) {
    ValidationReport report;
    auto issue = [&](IssueCode c, std::string ref, std::string msg) {
        report.issues.push_back({c, std::move(ref), std::move(msg)});
    };

    if (graph.schema_version != 1) {
        issue(IssueCode::InvalidNode, "", "schema_version must be 1");
    }
    if (graph.nodes.empty()) {
        issue(IssueCode::MissingEntry, "", "graph has no nodes");
        report.ok = false;
        return report;
    }

    std::map<std::string, const Node*> by_id;
    std::vector<const Node*> starts;
    std::size_t ends = 0;
    for (const auto& n : graph.nodes) {
        if (!by_id.emplace(n.id, &n).second) {
            issue(IssueCode::DuplicateId, n.id, "duplicate node id '" + n.id + "'");
        }
        if (!is_valid_identifier(n.id)) {
            issue(IssueCode::InvalidNode, n.id, "node id '" + n.id + "' is not an identifier");
        }
        for (const auto* ports : {&n.in_ports, &n.out_ports}) {
            std::set<std::string> seen;
            for (const auto& p : *ports) {
                if (!seen.insert(p).second) issue(IssueCode::InvalidNode, n.id, "duplicate port '" + p + "'");
            }
        }
        auto [din, dout] = default_ports(n.type, n.config);
        for (const auto& p : din) {
            if (!n.has_in_port(p)) issue(IssueCode::InvalidNode, n.id, "missing in-port '" + p + "'");
        }
        for (const auto& p : dout) {
            if (!n.has_out_port(p)) issue(IssueCode::InvalidNode, n.id, "missing out-port '" + p + "'");
        }
        if (n.type.kind == NodeKind::Start) {
            starts.push_back(&n);
            if (!n.in_ports.empty()) issue(IssueCode::InvalidNode, n.id, "Start node has in-ports");
        }
        if (n.type.kind == NodeKind::End) {
            ++ends;
            if (!n.out_ports.empty()) issue(IssueCode::InvalidNode, n.id, "End node has out-ports");
        }
        if (n.type.kind == NodeKind::Extension &&
            (catalog == nullptr || !catalog->has_component(n.type.plugin_namespace, n.type.component))) {
            issue(IssueCode::UnknownExtension, n.id, "unregistered component " + n.type.name());
        }
    }

    if (starts.empty()) {
        issue(IssueCode::MissingEntry, "", "graph has no Start node");
    } else if (starts.size() > 1) {
        issue(IssueCode::MissingEntry, starts[1]->id, "graph has more than one Start node");
    }
    if (!starts.empty() && graph.entry != starts.front()->id) {
        issue(IssueCode::MissingEntry, graph.entry, "entry does not name the Start node");
    }
    if (ends == 0) issue(IssueCode::MissingEnd, "", "graph has no End node");

    Adjacency adj;
    std::set<PortRef> used_from;
    std::map<PortRef, int> into;
    std::vector<const Edge*> loopbacks;
    for (const auto& e : graph.edges) {
        auto f = by_id.find(e.from.node);
        auto t = by_id.find(e.to.node);
        if (f == by_id.end() || t == by_id.end() || !f->second->has_out_port(e.from.port) ||
            !t->second->has_in_port(e.to.port)) {
            issue(IssueCode::DanglingEdge, edge_label(e), "edge endpoint does not exist");
            continue;
        }
        if (!used_from.insert(e.from).second) {
            issue(IssueCode::FanoutViolation, edge_label(e), "out-port already wired");
        }
        if (++into[e.to] == 2 && t->second->type.kind != NodeKind::Summary) {
            issue(IssueCode::FanoutViolation, edge_label(e), "in-port receives several edges");
        }
        adj.succ[e.from.node].push_back(e.to.node);
        adj.pred[e.to.node].push_back(e.from.node);
        if (is_loopback(graph, e)) {
            loopbacks.push_back(&e);
        } else {
            adj.dag_succ[e.from.node].push_back(e.to.node);
        }
    }

    // Kahn over the loop-free edge set.
    std::map<std::string, int> indeg;
    for (const auto& [id, _] : by_id) indeg[id] = 0;
    for (const auto& [from, tos] : adj.dag_succ) {
        for (const auto& t : tos) ++indeg[t];
    }
    std::deque<std::string> ready;
    for (const auto& [id, d] : indeg) {
        if (d == 0) ready.push_back(id);
    }
    std::size_t visited = 0;
    while (!ready.empty()) {
        auto cur = ready.front();
        ready.pop_front();
        ++visited;
        if (auto it = adj.dag_succ.find(cur); it != adj.dag_succ.end()) {
            for (const auto& t : it->second) {
                if (--indeg[t] == 0) ready.push_back(t);
            }
        }
    }
    if (visited != by_id.size()) {
        for (const auto& [id, d] : indeg) {
            if (d > 0) issue(IssueCode::IllegalCycle, id, "node lies on a cycle not closed by an ArrayLoop");
        }
    }

    for (const Edge* e : loopbacks) {
        auto body = next_hop(graph, e->to.node, "body");
        auto body_reach = body ? reach(adj.dag_succ, {body->node}) : std::set<std::string>{};
        if (!body_reach.count(e->from.node)) {
            issue(IssueCode::IllegalCycle, edge_label(*e), "loopback edge does not close the loop's own body");
        }
    }

    if (starts.size() == 1) {
        auto forward = reach(adj.succ, {starts.front()->id});
        std::vector<std::string> end_ids;
        for (const auto& n : graph.nodes) {
            if (n.type.kind == NodeKind::End) end_ids.push_back(n.id);
        }
        auto backward = reach(adj.pred, end_ids);
        for (const auto& n : graph.nodes) {
            if (!forward.count(n.id)) {
                issue(IssueCode::UnreachableNode, n.id, "node is not reachable from Start");
                continue;
            }
            if (n.type.kind == NodeKind::End) continue;
            if (n.type.kind == NodeKind::ArrayLoop && !used_from.count(PortRef{n.id, "done"})) continue;
            if (!backward.count(n.id)) {
                issue(IssueCode::UnreachableNode, n.id, "node does not lead to any End");
            }
        }
    }

    report.ok = report.issues.empty();
    return report;
}

std::string describe(const GraphEdit& e) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, edit::AddNode>) {
                return "AddNode " + x.node.id + " (" + x.node.type.name() + ")";
            } else if constexpr (std::is_same_v<T, edit::RemoveNode>) {
                return "RemoveNode " + x.id;
            } else if constexpr (std::is_same_v<T, edit::Connect>) {
                return "Connect " + edge_label(x.edge);
            } else if constexpr (std::is_same_v<T, edit::Disconnect>) {
                return "Disconnect " + edge_label(x.edge);
            } else if constexpr (std::is_same_v<T, edit::SetConfig>) {
                return "SetConfig " + x.id + "." + x.key + " = " + to_json(x.value);
            } else {
                return "MoveNode " + x.id + " (" + format_number(x.x) + "," + format_number(x.y) + ")";
            }
        },
        e);
}

Value edit_to_value(const GraphEdit& e) {
    auto edge_value = [](const Edge& edge) {
        return Value(Value::Object{{"from", Value::Object{{"node", edge.from.node}, {"port", edge.from.port}}},
                                   {"to", Value::Object{{"node", edge.to.node}, {"port", edge.to.port}}}});
    };
    return std::visit(
        [&](const auto& x) -> Value {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, edit::AddNode>) {
                return Value::Object{{"op", "AddNode"}, {"id", x.node.id}, {"kind", x.node.type.name()}};
            } else if constexpr (std::is_same_v<T, edit::RemoveNode>) {
                return Value::Object{{"op", "RemoveNode"}, {"id", x.id}};
            } else if constexpr (std::is_same_v<T, edit::Connect>) {
                return Value::Object{{"op", "Connect"}, {"edge", edge_value(x.edge)}};
            } else if constexpr (std::is_same_v<T, edit::Disconnect>) {
                return Value::Object{{"op", "Disconnect"}, {"edge", edge_value(x.edge)}};
            } else if constexpr (std::is_same_v<T, edit::SetConfig>) {
                return Value::Object{{"op", "SetConfig"}, {"id", x.id}, {"key", x.key}, {"value", x.value}};
            } else {
                return Value::Object{{"op", "MoveNode"}, {"id", x.id}, {"x", x.x}, {"y", x.y}};
            }
        },
        e);
}

TopologyGraph apply_edit(const TopologyGraph& graph, const GraphEdit& e) {
    TopologyGraph g = graph;
    auto require = [&](const std::string& id) -> Node& {
        Node* n = g.find_node(id);
        if (!n) throw Error("UnknownNode", "no node '" + id + "'");
        return *n;
    };
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, edit::AddNode>) {
                if (g.find_node(x.node.id)) throw Error("DuplicateNode", "node '" + x.node.id + "' already exists");
                g.nodes.push_back(x.node);
            } else if constexpr (std::is_same_v<T, edit::RemoveNode>) {
                require(x.id);
                std::erase_if(g.nodes, [&](const Node& n) { return n.id == x.id; });
                std::erase_if(g.edges, [&](const Edge& ed) { return ed.from.node == x.id || ed.to.node == x.id; });
            } else if constexpr (std::is_same_v<T, edit::Connect>) {
                require(x.edge.from.node);
                require(x.edge.to.node);
                for (const auto& ed : g.edges) {
                    if (ed.from == x.edge.from) {
                        throw Error("DuplicateEdge", "out-port " + x.edge.from.node + "." + x.edge.from.port +
                                                         " is already wired");
                    }
                }
                g.edges.push_back(x.edge);
            } else if constexpr (std::is_same_v<T, edit::Disconnect>) {
                auto it = std::find(g.edges.begin(), g.edges.end(), x.edge);
                if (it == g.edges.end()) throw Error("UnknownEdge", "no edge " + edge_label(x.edge));
                g.edges.erase(it);
            } else if constexpr (std::is_same_v<T, edit::SetConfig>) {
                Node& n = require(x.id);
                auto before = default_ports(n.type, n.config);
                bool defaulted = before.first == n.in_ports && before.second == n.out_ports;
                if (x.value.is_null()) {
                    n.config.erase(x.key);
                } else {
                    n.config[x.key] = x.value;
                }
                if (defaulted) {
                    auto after = default_ports(n.type, n.config);
                    n.in_ports = std::move(after.first);
                    n.out_ports = std::move(after.second);
                }
            } else {
                Node& n = require(x.id);
                n.layout = Layout{x.x, x.y};
            }
        },
        e);
    return g;
}

std::optional<PortRef> next_hop(const TopologyGraph& graph, std::string_view node, std::string_view port) {
    const Node* n = graph.find_node(node);
    if (!n) throw Error("UnknownNode", "no node '" + std::string(node) + "'");
    if (!n->has_out_port(port)) {
        throw Error("UnknownPort", "node '" + std::string(node) + "' has no out-port '" + std::string(port) + "'");
    }
    for (const auto& e : graph.edges) {
        if (e.from.node == node && e.from.port == port) return e.to;
    }
    return std::nullopt;
}

std::map<std::string, std::set<std::string>> error_regions(const TopologyGraph& graph) {
    std::map<std::string, std::vector<std::string>> dag;
    for (const auto& e : graph.edges) {
        if (!is_loopback(graph, e)) dag[e.from.node].push_back(e.to.node);
    }
    std::map<std::string, std::set<std::string>> regions;
    for (const auto& n : graph.nodes) {
        if (n.type.kind != NodeKind::ErrorHandler) continue;
        std::set<std::string> region;
        for (const auto& e : graph.edges) {
            if (e.from.node == n.id && e.from.port == "try") region = reach(dag, {e.to.node});
        }
        for (const auto& e : graph.edges) {
            if (e.from.node == n.id && e.from.port == "catch") {
                for (const auto& c : reach(dag, {e.to.node})) region.erase(c);
            }
        }
        region.erase(n.id);
        regions.emplace(n.id, std::move(region));
    }
    return regions;
}

std::vector<std::string> topological_order(const TopologyGraph& graph) {
    std::map<std::string, int> indeg;
    std::map<std::string, std::vector<std::string>> succ;
    for (const auto& n : graph.nodes) indeg.emplace(n.id, 0);
    for (const auto& e : graph.edges) {
        if (is_loopback(graph, e) || !indeg.count(e.from.node) || !indeg.count(e.to.node)) continue;
        succ[e.from.node].push_back(e.to.node);
        ++indeg[e.to.node];
    }
    // Start nodes sort before everything else that is ready.
    auto rank = [&](const std::string& id) {
        const Node* n = graph.find_node(id);
        return std::pair<int, std::string>(n && n->type.kind == NodeKind::Start ? 0 : 1, id);
    };
    auto cmp = [&](const std::string& a, const std::string& b) { return rank(a) > rank(b); };
    std::priority_queue<std::string, std::vector<std::string>, decltype(cmp)> ready(cmp);
    for (const auto& [id, d] : indeg) {
        if (d == 0) ready.push(id);
    }
    std::vector<std::string> order;
    std::set<std::string> placed;
    while (!ready.empty()) {
        auto cur = ready.top();
        ready.pop();
        order.push_back(cur);
        placed.insert(cur);
        for (const auto& t : succ[cur]) {
            if (--indeg[t] == 0) ready.push(t);
        }
    }
    for (const auto& [id, _] : indeg) {
        if (!placed.count(id)) order.push_back(id);
    }
    return order;
}

}  // namespace aad
