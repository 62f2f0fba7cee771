#include "aad/code_sync.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

namespace aad {

namespace {

constexpr std::string_view kDirective = "#aad";
constexpr std::string_view kInPortsKey = "@in_ports";
constexpr std::string_view kOutPortsKey = "@out_ports";

bool bare_key(std::string_view k) {
    if (k.empty() || !(std::isalpha(static_cast<unsigned char>(k[0])) || k[0] == '_')) return false;
    return std::all_of(k.begin(), k.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> out;
    while (!text.empty()) {
        auto nl = text.find('\n');
        if (nl == std::string_view::npos) {
            out.push_back(text);
            break;
        }
        out.push_back(text.substr(0, nl + 1));
        text.remove_prefix(nl + 1);
    }
    return out;
}

std::string_view strip_eol(std::string_view line) {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

std::string heredoc_terminator(const std::string& s) {
    std::vector<std::string_view> lines;
    std::string_view rest = s;
    for (auto l : split_lines(rest)) lines.push_back(strip_eol(l));
    for (int i = 0;; ++i) {
        std::string term = i == 0 ? "EOT" : "EOT" + std::to_string(i);
        if (std::none_of(lines.begin(), lines.end(), [&](std::string_view l) { return l == term; })) return term;
    }
}

void write_config_line(std::string& out, std::string_view key, const Value& v, bool reserved = false) {
    out += "  ";
    if (reserved || bare_key(key)) {
        out += key;
    } else {
        write_json_string(out, key);
    }
    out += ": ";
    if (v.is_string() && v.as_string().find('\n') != std::string::npos) {
        std::string term = heredoc_terminator(v.as_string());
        out += "<<" + term + "\n" + v.as_string() + "\n" + term + "\n";
        return;
    }
    write_json(out, v);
    out.push_back('\n');
}

std::string node_header(const Node& n) {
    std::string out = "#aad node " + n.id + " kind=" + n.type.name();
    if (n.layout) out += " at=(" + format_number(n.layout->x) + "," + format_number(n.layout->y) + ")";
    return out + "\n";
}

std::string render_node(const Node& n) {
    std::string out = node_header(n);
    for (const auto& [k, v] : n.config) {
        if (!v.is_null()) write_config_line(out, k, v);
    }
    auto [in, outp] = default_ports(n.type, n.config);
    auto ports = [](const std::vector<std::string>& ps) {
        Value::Array a;
        for (const auto& p : ps) a.emplace_back(p);
        return Value(std::move(a));
    };
    if (n.in_ports != in) write_config_line(out, kInPortsKey, ports(n.in_ports), true);
    if (n.out_ports != outp) write_config_line(out, kOutPortsKey, ports(n.out_ports), true);
    return out + "#aad end\n";
}

std::string wire_line(const Edge& e) {
    return "#aad wire " + e.from.node + "." + e.from.port + " -> " + e.to.node + "." + e.to.port + "\n";
}

std::string header_line(const TopologyGraph& g) {
    std::string out = "#aad agent ";
    write_json_string(out, g.name);
    return out + " v1\n";
}

// Structural element a run of margin lines follows: "^" for text before the
// header, "#" for the header, "n:<id>" for a node block, "w:<label>" for a wire.
using Anchor = std::string;

struct Document {
    TopologyGraph graph;
    std::vector<Anchor> order;             // structural elements in text order
    std::map<Anchor, std::string> margin;  // text following each element
};

[[noreturn]] void parse_fail(int line, const std::string& msg, int col = 1) {
    throw ParseError("ParseError", "line " + std::to_string(line) + ": " + msg, line, col);
}

[[noreturn]] void schema_fail(int line, const std::string& msg) {
    throw ParseError("SchemaError", "line " + std::to_string(line) + ": " + msg, line, 1);
}

Value::Type expected_type(std::string_view key) {
    static const std::map<std::string_view, Value::Type> table = {
        {"expr", Value::Type::String},     {"template", Value::Type::String},  {"prompt", Value::Type::String},
        {"system", Value::Type::String},   {"model", Value::Type::String},     {"question", Value::Type::String},
        {"text", Value::Type::String},     {"result", Value::Type::String},    {"separator", Value::Type::String},
        {"series", Value::Type::String},   {"graph", Value::Type::String},     {"component", Value::Type::String},
        {"mode", Value::Type::String},     {"store", Value::Type::String},     {"title", Value::Type::String},
        {"options", Value::Type::Array},   {"cases", Value::Type::Array},      {"args", Value::Type::Object},
        {"external", Value::Type::Object}, {"params", Value::Type::Object},
    };
    auto it = table.find(key);
    return it == table.end() ? Value::Type::Null : it->second;
}

std::vector<std::string> port_list(const Value& v, int line) {
    if (!v.is_array()) schema_fail(line, "port list must be an array of strings");
    std::vector<std::string> out;
    for (const auto& p : v.as_array()) {
        if (!p.is_string()) schema_fail(line, "port list must be an array of strings");
        out.push_back(p.as_string());
    }
    return out;
}

double coordinate(std::string_view s, int line) {
    try {
        Value v = parse_json(s);
        if (v.is_number()) return v.as_number();
    } catch (const Error&) {
    }
    parse_fail(line, "bad coordinate '" + std::string(s) + "'");
}

struct PendingWire {
    Edge edge;
    int line;
};

std::optional<PortRef> port_ref(std::string_view s) {
    auto dot = s.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 == s.size()) return std::nullopt;
    return PortRef{std::string(s.substr(0, dot)), std::string(s.substr(dot + 1))};
}

Document parse_document(std::string_view text) {
    Document doc;
    auto lines = split_lines(text);
    bool have_header = false;
    Anchor anchor = "^";
    doc.order.push_back(anchor);
    std::map<std::string, int> node_lines;
    std::vector<PendingWire> wires;

    auto add_margin = [&](std::string_view raw) { doc.margin[anchor] += raw; };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        int lineno = static_cast<int>(i) + 1;
        std::string_view line = strip_eol(lines[i]);
        bool directive = line.starts_with(kDirective) && (line.size() == kDirective.size() || line[kDirective.size()] == ' ');
        if (!directive) {
            add_margin(lines[i]);
            continue;
        }
        std::string_view rest = line.substr(kDirective.size());
        if (rest.starts_with(" agent ")) {
            if (have_header) parse_fail(lineno, "second agent header");
            std::string_view body = rest.substr(7);
            auto sp = body.rfind(' ');
            if (sp == std::string_view::npos) parse_fail(lineno, "agent header needs a quoted name and a version");
            if (body.substr(sp + 1) != "v1") schema_fail(lineno, "unsupported script version '" + std::string(body.substr(sp + 1)) + "'");
            Value name;
            try {
                name = parse_json(body.substr(0, sp));
            } catch (const ParseError& e) {
                parse_fail(lineno, "agent name: " + std::string(e.what()), 13);
            }
            if (!name.is_string()) parse_fail(lineno, "agent name must be a quoted string", 13);
            doc.graph.name = name.as_string();
            have_header = true;
            anchor = "#";
            doc.order.push_back(anchor);
            continue;
        }
        if (!have_header) parse_fail(lineno, "expected '#aad agent \"<name>\" v1' before any other directive");
        if (rest.starts_with(" node ")) {
            std::vector<std::string_view> tok;
            std::string_view t = rest.substr(6);
            while (!t.empty()) {
                auto sp = t.find(' ');
                if (sp != 0) tok.push_back(t.substr(0, sp));
                if (sp == std::string_view::npos) break;
                t.remove_prefix(sp + 1);
            }
            if (tok.size() < 2 || tok.size() > 3 || !tok[1].starts_with("kind=")) {
                parse_fail(lineno, "expected '#aad node <id> kind=<kind> [at=(<x>,<y>)]'");
            }
            Node n;
            n.id = std::string(tok[0]);
            if (!is_valid_identifier(n.id)) schema_fail(lineno, "node id '" + n.id + "' is not an identifier");
            if (node_lines.count(n.id)) {
                schema_fail(lineno, "duplicate node id '" + n.id + "' (first declared on line " +
                                        std::to_string(node_lines[n.id]) + ")");
            }
            node_lines[n.id] = lineno;
            try {
                n.type = NodeType::parse(tok[1].substr(5));
            } catch (const Error& e) {
                schema_fail(lineno, e.what());
            }
            if (tok.size() == 3) {
                std::string_view at = tok[2];
                if (!at.starts_with("at=(") || !at.ends_with(")")) parse_fail(lineno, "expected at=(<x>,<y>)");
                at = at.substr(4, at.size() - 5);
                auto comma = at.find(',');
                if (comma == std::string_view::npos) parse_fail(lineno, "expected at=(<x>,<y>)");
                n.layout = Layout{coordinate(at.substr(0, comma), lineno), coordinate(at.substr(comma + 1), lineno)};
            }

            std::optional<std::vector<std::string>> in_ports, out_ports;
            bool closed = false;
            for (++i; i < lines.size(); ++i) {
                int ln = static_cast<int>(i) + 1;
                std::string_view cl = strip_eol(lines[i]);
                if (cl == "#aad end") {
                    closed = true;
                    break;
                }
                if (cl.empty()) continue;
                if (cl.starts_with(kDirective)) parse_fail(ln, "missing '#aad end' for node '" + n.id + "'");
                if (!cl.starts_with("  ")) parse_fail(ln, "config lines must be indented by two spaces");
                std::string_view body = cl.substr(2);
                std::string key;
                std::size_t colon;
                bool quoted = body.starts_with('"');
                if (quoted) {
                    std::size_t j = 1;
                    while (j < body.size() && body[j] != '"') j += body[j] == '\\' ? 2 : 1;
                    if (j >= body.size()) parse_fail(ln, "unterminated key", 3);
                    try {
                        key = parse_json(body.substr(0, j + 1)).as_string();
                    } catch (const ParseError& e) {
                        parse_fail(ln, std::string("bad key: ") + e.what(), 3);
                    }
                    colon = j + 1;
                } else {
                    colon = body.find(':');
                    if (colon == std::string_view::npos) parse_fail(ln, "expected '<key>: <value>'", 3);
                    key = std::string(body.substr(0, colon));
                    if (!bare_key(key) && key != kInPortsKey && key != kOutPortsKey) {
                        parse_fail(ln, "bad key '" + key + "'", 3);
                    }
                }
                if (body.substr(colon, 2) != ": ") parse_fail(ln, "expected ': ' after key", static_cast<int>(colon) + 3);
                std::string_view vtext = body.substr(colon + 2);
                Value v;
                if (vtext.starts_with("<<")) {
                    std::string term(vtext.substr(2));
                    if (term.empty()) parse_fail(ln, "heredoc needs a terminator");
                    std::string s;
                    bool ended = false;
                    bool first = true;
                    for (++i; i < lines.size(); ++i) {
                        std::string_view hl = lines[i];
                        if (strip_eol(hl) == term) {
                            ended = true;
                            break;
                        }
                        if (!first) s.push_back('\n');
                        first = false;
                        if (!hl.empty() && hl.back() == '\n') hl.remove_suffix(1);
                        s += hl;
                    }
                    if (!ended) parse_fail(ln, "heredoc '" + term + "' is never closed");
                    v = std::move(s);
                } else {
                    try {
                        v = parse_json(vtext);
                    } catch (const ParseError& e) {
                        parse_fail(ln, std::string("value: ") + e.what(), static_cast<int>(colon) + 4 + e.col() - 1);
                    }
                }
                if (!quoted && (key == kInPortsKey || key == kOutPortsKey)) {
                    auto& slot = key == kInPortsKey ? in_ports : out_ports;
                    if (slot) schema_fail(ln, "duplicate key '" + key + "'");
                    slot = port_list(v, ln);
                    continue;
                }
                if (n.config.count(key)) schema_fail(ln, "duplicate key '" + key + "'");
                if (v.is_null()) continue;
                Value::Type want = expected_type(key);
                if (want != Value::Type::Null && v.type() != want) {
                    schema_fail(ln, "'" + key + "' of node '" + n.id + "' must be " + std::string(type_name(want)) +
                                        ", got " + std::string(type_name(v.type())));
                }
                n.config.emplace(std::move(key), std::move(v));
            }
            if (!closed) parse_fail(lineno, "node '" + n.id + "' has no '#aad end'");
            auto [din, dout] = default_ports(n.type, n.config);
            n.in_ports = in_ports ? *in_ports : din;
            n.out_ports = out_ports ? *out_ports : dout;
            doc.graph.nodes.push_back(std::move(n));
            anchor = "n:" + doc.graph.nodes.back().id;
            doc.order.push_back(anchor);
            continue;
        }
        if (rest.starts_with(" wire ")) {
            std::string_view body = rest.substr(6);
            auto arrow = body.find(" -> ");
            std::optional<PortRef> from, to;
            if (arrow != std::string_view::npos) {
                from = port_ref(body.substr(0, arrow));
                to = port_ref(body.substr(arrow + 4));
            }
            if (!from || !to) schema_fail(lineno, "malformed wire, expected '<id>.<port> -> <id>.<port>'");
            Edge e{*from, *to};
            wires.push_back({e, lineno});
            anchor = "w:" + edge_label(e);
            doc.order.push_back(anchor);
            continue;
        }
        if (rest == " end") parse_fail(lineno, "'#aad end' outside a node block");
        parse_fail(lineno, "unknown directive '" + std::string(line) + "'");
    }
    if (!have_header) parse_fail(1, "missing '#aad agent \"<name>\" v1' header");

    std::set<Edge> seen;
    for (const auto& w : wires) {
        const Node* from = doc.graph.find_node(w.edge.from.node);
        const Node* to = doc.graph.find_node(w.edge.to.node);
        if (!from) schema_fail(w.line, "wire references undeclared node '" + w.edge.from.node + "'");
        if (!to) schema_fail(w.line, "wire references undeclared node '" + w.edge.to.node + "'");
        if (!from->has_out_port(w.edge.from.port)) {
            schema_fail(w.line, "node '" + from->id + "' has no out-port '" + w.edge.from.port + "'");
        }
        if (!to->has_in_port(w.edge.to.port)) {
            schema_fail(w.line, "node '" + to->id + "' has no in-port '" + w.edge.to.port + "'");
        }
        if (!seen.insert(w.edge).second) schema_fail(w.line, "duplicate wire " + edge_label(w.edge));
        doc.graph.edges.push_back(w.edge);
    }
    for (const auto& n : doc.graph.nodes) {
        if (n.type.kind == NodeKind::Start) {
            doc.graph.entry = n.id;
            break;
        }
    }
    doc.graph = doc.graph.normalized();
    return doc;
}

/// Canonical rendering; margin runs follow their anchors, and runs whose
/// anchor no longer exists follow the nearest earlier surviving anchor.
std::string render(const TopologyGraph& graph, const Document* source) {
    std::vector<std::pair<Anchor, std::string>> elements;
    elements.emplace_back("#", header_line(graph));
    for (const auto& id : topological_order(graph)) {
        elements.emplace_back("n:" + id, render_node(*graph.find_node(id)));
    }
    for (const auto& e : graph.normalized().edges) elements.emplace_back("w:" + edge_label(e), wire_line(e));

    std::map<Anchor, std::string> margin;
    if (source) {
        std::set<Anchor> present{"^"};
        for (const auto& [a, _] : elements) present.insert(a);
        Anchor effective = "^";
        for (const auto& a : source->order) {
            if (present.count(a)) effective = a;
            auto it = source->margin.find(a);
            if (it != source->margin.end()) margin[effective] += it->second;
        }
    }
    std::string out = margin["^"];
    for (const auto& [a, text] : elements) {
        if (!out.empty() && out.back() != '\n') out.push_back('\n');
        out += text;
        out += margin[a];
    }
    return out;
}

Value node_value(const Node& n) {
    Value::Object o{{"kind", n.type.name()}, {"config", n.config}};
    if (n.layout) o["at"] = Value::Array{n.layout->x, n.layout->y};
    return o;
}

Value layout_value(const std::optional<Layout>& l) {
    return l ? Value(Value::Array{l->x, l->y}) : Value();
}

template <typename T>
struct Merged {
    T value;
    std::optional<ChangeOrigin> origin;
    bool conflict = false;
};

template <typename T>
Merged<T> merge3(const T& base, const T& graph, const T& text) {
    if (text == base) return {graph, graph == base ? std::nullopt : std::optional(ChangeOrigin::FromGraph), false};
    if (graph == base || graph == text) return {text, ChangeOrigin::FromText, false};
    return {text, ChangeOrigin::FromText, true};
}

int change_rank(const GraphEdit& e) {
    return std::visit(
        [](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, edit::RemoveNode>) return 0;
            if constexpr (std::is_same_v<T, edit::AddNode>) return 1;
            if constexpr (std::is_same_v<T, edit::SetConfig>) return 2;
            if constexpr (std::is_same_v<T, edit::MoveNode>) return 3;
            if constexpr (std::is_same_v<T, edit::Disconnect>) return 4;
            return 5;
        },
        e);
}

class Merger {
public:
    Merger(const TopologyGraph& a, const TopologyGraph& g, const TopologyGraph& t) : a_(a), g_(g), t_(t) {}

    SyncResult run() {
        auto name = merge3(a_.name, g_.name, t_.name);
        if (name.conflict) conflict("", "name", g_.name, t_.name);
        out_.graph.name = name.value;
        out_.graph.schema_version = 1;

        std::set<std::string> ids;
        for (const auto* g : {&a_, &g_, &t_}) {
            for (const auto& n : g->nodes) ids.insert(n.id);
        }
        for (const auto& id : ids) merge_node(id);
        merge_edges();

        for (const auto& n : out_.graph.nodes) {
            if (n.type.kind == NodeKind::Start) {
                out_.graph.entry = n.id;
                break;
            }
        }
        if (out_.graph.entry.empty()) out_.graph.entry = g_.entry;
        out_.graph = out_.graph.normalized();
        std::stable_sort(out_.changes.begin(), out_.changes.end(), [](const SyncChange& x, const SyncChange& y) {
            return change_rank(x.edit) < change_rank(y.edit);
        });
        return std::move(out_);
    }

private:
    void change(ChangeOrigin o, GraphEdit e) { out_.changes.push_back({o, std::move(e)}); }
    void conflict(std::string node, std::string key, Value g, Value t) {
        out_.conflicts.push_back({std::move(node), std::move(key), std::move(g), std::move(t)});
    }

    void merge_node(const std::string& id) {
        const Node* a = a_.find_node(id);
        const Node* g = g_.find_node(id);
        const Node* t = t_.find_node(id);
        if (!a) {
            if (t) {
                if (g && !(*g == *t)) conflict(id, "", node_value(*g), node_value(*t));
                keep(*t);
                change(ChangeOrigin::FromText, edit::AddNode{*t});
            } else {
                keep(*g);
                change(ChangeOrigin::FromGraph, edit::AddNode{*g});
            }
            return;
        }
        if (!t) {
            if (g && !(*g == *a)) conflict(id, "", node_value(*g), nullptr);
            removed_by_[id] = g ? ChangeOrigin::FromText : ChangeOrigin::FromGraph;
            change(ChangeOrigin::FromText, edit::RemoveNode{id});
            return;
        }
        if (!g) {
            if (*t == *a) {
                removed_by_[id] = ChangeOrigin::FromGraph;
                change(ChangeOrigin::FromGraph, edit::RemoveNode{id});
                return;
            }
            conflict(id, "", nullptr, node_value(*t));
            g = a;
        }

        auto type = merge3(a->type, g->type, t->type);
        if (type.conflict) conflict(id, "kind", g->type.name(), t->type.name());
        if (type.value != a->type) {
            // A kind change replaces the node wholesale from the changing side.
            const Node& src = type.origin == ChangeOrigin::FromText ? *t : *g;
            keep(src);
            change(*type.origin, edit::RemoveNode{id});
            change(*type.origin, edit::AddNode{src});
            return;
        }

        Node n;
        n.id = id;
        n.type = type.value;
        std::set<std::string, std::less<>> keys;
        for (const auto* x : {a, g, t}) {
            for (const auto& [k, _] : x->config) keys.insert(k);
        }
        auto get = [](const Node* x, const std::string& k) {
            auto it = x->config.find(k);
            return it == x->config.end() ? Value() : it->second;
        };
        for (const auto& k : keys) {
            Value av = get(a, k), gv = get(g, k), tv = get(t, k);
            auto m = merge3(av, gv, tv);
            if (m.conflict) conflict(id, k, gv, tv);
            if (!m.value.is_null()) n.config.emplace(k, m.value);
            if (m.origin) change(*m.origin, edit::SetConfig{id, k, m.value});
        }
        auto layout = merge3(a->layout, g->layout, t->layout);
        if (layout.conflict) conflict(id, "at", layout_value(g->layout), layout_value(t->layout));
        n.layout = layout.value;
        if (layout.origin && layout.value) change(*layout.origin, edit::MoveNode{id, layout.value->x, layout.value->y});

        auto ports = merge3(std::pair(a->in_ports, a->out_ports), std::pair(g->in_ports, g->out_ports),
                            std::pair(t->in_ports, t->out_ports));
        n.in_ports = ports.value.first;
        n.out_ports = ports.value.second;
        keep(n);
    }

    void keep(const Node& n) { out_.graph.nodes.push_back(n); }

    void merge_edges() {
        std::set<Edge> as(a_.edges.begin(), a_.edges.end());
        std::set<Edge> gs(g_.edges.begin(), g_.edges.end());
        std::set<Edge> ts(t_.edges.begin(), t_.edges.end());
        std::set<Edge> all = as;
        all.insert(gs.begin(), gs.end());
        all.insert(ts.begin(), ts.end());

        auto implied = [&](const Edge& e, ChangeOrigin o) {
            for (const auto* id : {&e.from.node, &e.to.node}) {
                auto it = removed_by_.find(*id);
                if (it != removed_by_.end() && it->second == o) return true;
            }
            return false;
        };
        for (const auto& e : all) {
            bool in_a = as.count(e), in_g = gs.count(e), in_t = ts.count(e);
            if (in_a) {
                if (in_g && in_t) {
                    admit(e, std::nullopt);
                } else if (!in_t) {
                    if (!implied(e, ChangeOrigin::FromText)) change(ChangeOrigin::FromText, edit::Disconnect{e});
                } else if (!implied(e, ChangeOrigin::FromGraph)) {
                    change(ChangeOrigin::FromGraph, edit::Disconnect{e});
                }
                continue;
            }
            admit(e, in_t ? ChangeOrigin::FromText : ChangeOrigin::FromGraph);
        }
    }

    void admit(const Edge& e, std::optional<ChangeOrigin> origin) {
        const Node* from = out_.graph.find_node(e.from.node);
        const Node* to = out_.graph.find_node(e.to.node);
        if (!from || !to || !from->has_out_port(e.from.port) || !to->has_in_port(e.to.port)) {
            bool from_text = origin == ChangeOrigin::FromText;
            conflict(e.from.node, "wire " + edge_label(e), from_text ? Value() : Value(true),
                     from_text ? Value(true) : Value());
            return;
        }
        out_.graph.edges.push_back(e);
        if (origin) change(*origin, edit::Connect{e});
    }

    const TopologyGraph& a_;
    const TopologyGraph& g_;
    const TopologyGraph& t_;
    std::map<std::string, ChangeOrigin> removed_by_;
    SyncResult out_;
};

}  // namespace

std::string_view to_string(ChangeOrigin o) { return o == ChangeOrigin::FromText ? "FromText" : "FromGraph"; }

std::string render_script(const TopologyGraph& graph) { return render(graph, nullptr); }

std::string generate(const TopologyGraph& graph, const ComponentCatalog* catalog) {
    auto report = validate(graph, catalog);
    if (!report.ok) {
        const auto& first = report.issues.front();
        throw Error("InvalidGraph", std::string(to_string(first.code)) + " " + first.ref + ": " + first.message);
    }
    return render_script(graph);
}

TopologyGraph parse_script(std::string_view script) { return parse_document(script).graph; }

SyncResult sync(const TopologyGraph& base, std::string_view edited_script, const TopologyGraph* current) {
    Document doc = parse_document(edited_script);
    SyncResult r = Merger(base, current ? *current : base, doc.graph).run();
    r.script = render(r.graph, &doc);
    return r;
}

Value sync_result_to_value(const SyncResult& r) {
    Value::Array changes;
    for (const auto& c : r.changes) {
        changes.push_back(Value::Object{{"origin", to_string(c.origin)}, {"edit", edit_to_value(c.edit)}});
    }
    Value::Array conflicts;
    for (const auto& c : r.conflicts) {
        conflicts.push_back(Value::Object{
            {"node", c.node}, {"key", c.key}, {"graph_value", c.graph_value}, {"text_value", c.text_value}});
    }
    return Value::Object{{"changes", std::move(changes)}, {"conflicts", std::move(conflicts)}};
}

}  // namespace aad
