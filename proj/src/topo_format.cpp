#include "aad/topo_format.hpp"

#include <fstream>
#include <sstream>

namespace aad {

namespace {

void write_string_list(std::string& out, const std::vector<std::string>& list) {
    out.push_back('[');
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (i) out.push_back(',');
        write_json_string(out, list[i]);
    }
    out.push_back(']');
}

void write_node(std::string& out, const Node& n) {
    out += "{\"id\":";
    write_json_string(out, n.id);
    out += ",\"kind\":";
    write_json_string(out, n.type.name());
    out += ",\"config\":";
    write_json(out, Value(n.config));
    out += ",\"in_ports\":";
    write_string_list(out, n.in_ports);
    out += ",\"out_ports\":";
    write_string_list(out, n.out_ports);
    if (n.layout) {
        out += ",\"layout\":{\"x\":" + format_number(n.layout->x) + ",\"y\":" + format_number(n.layout->y) + "}";
    }
    out.push_back('}');
}

void write_port_ref(std::string& out, const PortRef& p) {
    out += "{\"node\":";
    write_json_string(out, p.node);
    out += ",\"port\":";
    write_json_string(out, p.port);
    out.push_back('}');
}

[[noreturn]] void schema_error(const std::string& msg) { throw Error("SchemaError", msg); }

const Value& require(const Value::Object& obj, std::string_view key, Value::Type type, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(std::string(where) + ": missing field '" + std::string(key) + "'");
    if (it->second.type() != type) {
        schema_error(std::string(where) + ": field '" + std::string(key) + "' must be " +
                     std::string(type_name(type)));
    }
    return it->second;
}

void reject_unknown(const Value::Object& obj, std::initializer_list<std::string_view> allowed,
                    std::string_view where) {
    for (const auto& [k, _] : obj) {
        bool ok = false;
        for (auto a : allowed) ok = ok || a == k;
        if (!ok) schema_error(std::string(where) + ": unknown key '" + k + "'");
    }
}

std::vector<std::string> string_list(const Value& v, std::string_view where) {
    if (!v.is_array()) schema_error(std::string(where) + " must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v.as_array()) {
        if (!e.is_string()) schema_error(std::string(where) + " must be an array of strings");
        out.push_back(e.as_string());
    }
    return out;
}

PortRef port_ref(const Value& v, std::string_view where) {
    if (!v.is_object()) schema_error(std::string(where) + " must be an object");
    const auto& obj = v.as_object();
    reject_unknown(obj, {"node", "port"}, where);
    return PortRef{require(obj, "node", Value::Type::String, where).as_string(),
                   require(obj, "port", Value::Type::String, where).as_string()};
}

}  // namespace

std::string serialize_unchecked(const TopologyGraph& graph) {
    auto g = graph.normalized();
    std::string out = "{\n  \"schema_version\": " + std::to_string(g.schema_version) + ",\n  \"name\": ";
    write_json_string(out, g.name);
    out += ",\n  \"entry\": ";
    write_json_string(out, g.entry);
    out += ",\n  \"nodes\": [";
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        out += i ? ",\n    " : "\n    ";
        write_node(out, g.nodes[i]);
    }
    out += g.nodes.empty() ? "],\n" : "\n  ],\n";
    out += "  \"edges\": [";
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        out += i ? ",\n    " : "\n    ";
        out += "{\"from\":";
        write_port_ref(out, g.edges[i].from);
        out += ",\"to\":";
        write_port_ref(out, g.edges[i].to);
        out.push_back('}');
    }
    out += g.edges.empty() ? "]\n" : "\n  ]\n";
    out += "}\n";
    return out;
}

std::string serialize(const TopologyGraph& graph, const ComponentCatalog* catalog) {
    auto report = validate(graph, catalog);
    if (!report.ok) {
        const auto& first = report.issues.front();
        throw Error("InvalidGraph", std::string(to_string(first.code)) + " " + first.ref + ": " + first.message);
    }
    return serialize_unchecked(graph);
}

TopologyGraph graph_from_value(const Value& doc) {
    if (!doc.is_object()) schema_error("document must be a JSON object");
    const auto& top = doc.as_object();
    reject_unknown(top, {"schema_version", "name", "entry", "nodes", "edges"}, "document");
    const auto& version = require(top, "schema_version", Value::Type::Number, "document");
    if (version.as_number() != 1) schema_error("unsupported schema_version " + format_number(version.as_number()));

    TopologyGraph g;
    g.name = require(top, "name", Value::Type::String, "document").as_string();
    g.entry = require(top, "entry", Value::Type::String, "document").as_string();

    for (const auto& nv : require(top, "nodes", Value::Type::Array, "document").as_array()) {
        if (!nv.is_object()) schema_error("node must be an object");
        const auto& obj = nv.as_object();
        reject_unknown(obj, {"id", "kind", "config", "in_ports", "out_ports", "layout"}, "node");
        const std::string& id = require(obj, "id", Value::Type::String, "node").as_string();
        std::string where = "node '" + id + "'";
        NodeType type = NodeType::parse(require(obj, "kind", Value::Type::String, where).as_string());
        Value::Object config;
        if (const Value* c = nv.find("config")) {
            if (!c->is_object()) schema_error(where + ": config must be an object");
            for (const auto& [k, v] : c->as_object()) {
                if (!v.is_null()) config.emplace(k, v);
            }
        }
        Node n = make_node(id, type, std::move(config));
        if (const Value* p = nv.find("in_ports")) n.in_ports = string_list(*p, where + " in_ports");
        if (const Value* p = nv.find("out_ports")) n.out_ports = string_list(*p, where + " out_ports");
        if (const Value* l = nv.find("layout")) {
            if (!l->is_object()) schema_error(where + ": layout must be an object");
            reject_unknown(l->as_object(), {"x", "y"}, where + " layout");
            n.layout = Layout{require(l->as_object(), "x", Value::Type::Number, where).as_number(),
                              require(l->as_object(), "y", Value::Type::Number, where).as_number()};
        }
        g.nodes.push_back(std::move(n));
    }
    for (const auto& ev : require(top, "edges", Value::Type::Array, "document").as_array()) {
        if (!ev.is_object()) schema_error("edge must be an object");
        reject_unknown(ev.as_object(), {"from", "to"}, "edge");
        const Value* from = ev.find("from");
        const Value* to = ev.find("to");
        if (!from || !to) schema_error("edge: missing 'from' or 'to'");
        g.edges.push_back(Edge{port_ref(*from, "edge.from"), port_ref(*to, "edge.to")});
    }
    return g.normalized();
}

TopologyGraph deserialize(std::string_view text) { return graph_from_value(parse_json(text)); }

Value graph_to_value(const TopologyGraph& graph) { return parse_json(serialize_unchecked(graph)); }

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("IoError", "short write to " + path.string());
}

TopologyGraph load_graph_file(const std::filesystem::path& path) { return deserialize(read_text_file(path)); }

void save_graph_file(const std::filesystem::path& path, const TopologyGraph& graph,
                     const ComponentCatalog* catalog) {
    write_text_file(path, serialize(graph, catalog));
}

}  // namespace aad
