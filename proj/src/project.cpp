#include "aad/project.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <set>

#include "aad/topo_format.hpp"

namespace aad::project {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error("ConfigError", msg); }

std::string string_field(const Value& doc, std::string_view key, bool required, const std::string& where) {
    const Value* v = doc.find(key);
    if (!v || v->is_null()) {
        if (required) config_error(where + ": missing '" + std::string(key) + "'");
        return {};
    }
    if (!v->is_string()) config_error(where + ": '" + std::string(key) + "' must be a string");
    return v->as_string();
}

Value read_json_file(const fs::path& path, const std::string& code) {
    try {
        return parse_json(read_text_file(path));
    } catch (const Error& e) {
        throw Error(code, path.string() + ": " + e.what());
    }
}

std::unique_ptr<Workspace> assemble(std::string name, const std::string& mode, const std::string& base_url,
                                    const std::optional<fs::path>& records, bool record_to_file,
                                    const std::optional<fs::path>& profile, std::optional<long long> seed) {
    check_mode(mode);
    auto ws = std::make_unique<Workspace>();
    ws->name = std::move(name);
    ws->mode_name = mode;
    std::shared_ptr<llm::Provider> provider;
    if (!base_url.empty() && mode != "mock") {
        ws->transport = std::make_unique<llm::HttplibTransport>();
        const char* key = std::getenv("AAD_API_KEY");
        provider = std::make_shared<llm::HttpProvider>(base_url, key ? key : "", *ws->transport);
    } else if (mode == "live") {
        config_error("gateway mode live needs gateway.base_url");
    } else {
        provider = std::make_shared<llm::MockProvider>(seed.value_or(0));
    }
    ws->gateway = std::make_unique<llm::Gateway>(provider);
    ws->mode = mode == "mock" ? llm::Mode::Live : llm::parse_mode(mode);
    if (records) {
        if (fs::exists(*records)) ws->gateway->records().load(*records);
        if (record_to_file) ws->gateway->records().bind_file(*records);
    }
    if (profile && fs::exists(*profile)) ws->profile = llm::load_mimic_profile(*profile);
    return ws;
}

std::string graph_file_name(const std::string& name) {
    std::string out;
    for (char c : name) {
        bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        out.push_back(keep ? c : '_');
    }
    if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
    return out + std::string(kTopoExtension);
}

/// Namespaces a graph needs from plugins, with the node that needs each.
std::vector<std::pair<std::string, std::pair<std::string, std::string>>> plugin_needs(const TopologyGraph& g) {
    std::vector<std::pair<std::string, std::pair<std::string, std::string>>> out;
    for (const auto& n : g.nodes) {
        if (n.type.kind == NodeKind::Extension) {
            out.push_back({n.id, {n.type.plugin_namespace, n.type.component}});
        } else if (n.type.kind == NodeKind::Tool) {
            auto it = n.config.find("component");
            std::string comp = it != n.config.end() && it->second.is_string() ? it->second.as_string() : "";
            auto slash = comp.find('/');
            out.push_back({n.id, {comp.substr(0, slash), slash == std::string::npos ? "" : comp.substr(slash + 1)}});
        }
    }
    return out;
}

struct Closure {
    std::vector<std::shared_ptr<const TopologyGraph>> graphs;  // entry first
    std::set<std::string> namespaces;
};

Closure closure(std::shared_ptr<const TopologyGraph> entry, const runtime::GraphLibrary& lib,
                const plugins::PluginRegistry& reg, const std::string& bad_code) {
    Closure c;
    std::set<std::string> seen{entry->name};
    std::deque<std::shared_ptr<const TopologyGraph>> todo{entry};
    while (!todo.empty()) {
        auto g = todo.front();
        todo.pop_front();
        c.graphs.push_back(g);
        for (const auto& n : g->nodes) {
            if (n.type.kind != NodeKind::SubAgent) continue;
            auto it = n.config.find("graph");
            std::string target = it != n.config.end() && it->second.is_string() ? it->second.as_string() : "";
            auto sub = lib.find(target);
            if (!sub) {
                throw Error(bad_code.empty() ? "UnresolvedSubAgent" : bad_code,
                            "node '" + n.id + "' in graph '" + g->name + "' calls missing graph '" + target + "'");
            }
            if (seen.insert(sub->name).second) todo.push_back(sub);
        }
        for (const auto& [node, need] : plugin_needs(*g)) {
            if (!reg.has_component(need.first, need.second)) {
                throw Error(bad_code.empty() ? "UnresolvedPlugin" : bad_code,
                            "node '" + node + "' in graph '" + g->name + "' needs missing component '" + need.first +
                                "/" + need.second + "'");
            }
            c.namespaces.insert(need.first);
        }
        auto report = validate(*g, &reg);
        if (!report.ok) {
            const auto& first = report.issues.front();
            throw Error(bad_code.empty() ? "InvalidGraph" : bad_code,
                        "graph '" + g->name + "': " + std::string(to_string(first.code)) + " " + first.ref + ": " +
                            first.message);
        }
    }
    return c;
}

}  // namespace

void check_mode(std::string_view mode) {
    if (mode != "live" && mode != "record" && mode != "replay" && mode != "mimic-first" && mode != "mock") {
        config_error("unknown gateway mode '" + std::string(mode) + "'");
    }
}

ProjectConfig load_project(const fs::path& dir) {
    fs::path file = dir / kProjectFile;
    if (!fs::exists(file)) config_error("no " + std::string(kProjectFile) + " in " + dir.string());
    Value doc = read_json_file(file, "ConfigError");
    if (!doc.is_object()) config_error(file.string() + ": expected an object");
    ProjectConfig cfg;
    cfg.root = dir;
    std::string where = file.string();
    cfg.name = string_field(doc, "name", true, where);
    cfg.entry_graph = string_field(doc, "entry_graph", true, where);
    if (auto v = string_field(doc, "version", false, where); !v.empty()) cfg.version = v;
    if (const Value* pp = doc.find("plugin_paths")) {
        if (!pp->is_array()) config_error(where + ": 'plugin_paths' must be an array");
        for (const auto& p : pp->as_array()) {
            if (!p.is_string()) config_error(where + ": 'plugin_paths' must hold strings");
            cfg.plugin_paths.push_back(p.as_string());
        }
    }
    if (const Value* gw = doc.find("gateway")) {
        if (!gw->is_object()) config_error(where + ": 'gateway' must be an object");
        if (auto m = string_field(*gw, "mode", false, where + " gateway"); !m.empty()) cfg.gateway.mode = m;
        cfg.gateway.base_url = string_field(*gw, "base_url", false, where + " gateway");
        cfg.gateway.mimic_profile = string_field(*gw, "mimic_profile", false, where + " gateway");
        cfg.gateway.records = string_field(*gw, "records", false, where + " gateway");
    }
    check_mode(cfg.gateway.mode);
    if (const Value* dbg = doc.find("debug")) {
        const Value* port = dbg->find("port");
        if (port) {
            if (!port->is_number()) config_error(where + ": 'debug.port' must be a number");
            cfg.debug_port = static_cast<int>(port->as_number());
        }
    }
    if (!fs::exists(dir / cfg.entry_graph)) throw Error("MissingGraph", "entry graph " + cfg.entry_graph + " not found");
    return cfg;
}

Value project_to_value(const ProjectConfig& cfg) {
    Value::Array paths;
    for (const auto& p : cfg.plugin_paths) paths.emplace_back(p);
    Value::Object gw{{"mode", cfg.gateway.mode}};
    if (!cfg.gateway.base_url.empty()) gw.emplace("base_url", cfg.gateway.base_url);
    if (!cfg.gateway.mimic_profile.empty()) gw.emplace("mimic_profile", cfg.gateway.mimic_profile);
    if (!cfg.gateway.records.empty()) gw.emplace("records", cfg.gateway.records);
    return Value::Object{{"name", cfg.name},
                         {"version", cfg.version},
                         {"entry_graph", cfg.entry_graph},
                         {"plugin_paths", std::move(paths)},
                         {"gateway", std::move(gw)},
                         {"debug", Value::Object{{"port", cfg.debug_port}}}};
}

std::optional<fs::path> find_project_root(const fs::path& start) {
    std::error_code ec;
    fs::path p = fs::absolute(start, ec);
    while (!p.empty()) {
        if (fs::exists(p / kProjectFile)) return p;
        if (p == p.parent_path()) break;
        p = p.parent_path();
    }
    return std::nullopt;
}

runtime::SessionOptions Workspace::session_options() const {
    runtime::SessionOptions o;
    o.mode = mode;
    o.mimic_profile = profile;
    return o;
}

std::vector<std::pair<fs::path, TopologyGraph>> project_graphs(const ProjectConfig& cfg) {
    std::vector<std::pair<fs::path, TopologyGraph>> out;
    fs::path entry = fs::weakly_canonical(cfg.root / cfg.entry_graph);
    if (!fs::exists(entry)) throw Error("MissingGraph", "entry graph " + cfg.entry_graph + " not found");
    out.emplace_back(entry, load_graph_file(entry));
    std::set<fs::path> files;
    for (const fs::path& dir : {cfg.root / "graphs", entry.parent_path()}) {
        if (!fs::is_directory(dir)) continue;
        for (const auto& e : fs::recursive_directory_iterator(dir)) {
            std::string fname = e.path().filename().string();
            if (e.is_regular_file() && !fname.starts_with(".") && fname.ends_with(kTopoExtension)) {
                files.insert(fs::weakly_canonical(e.path()));
            }
        }
    }
    files.erase(entry);
    std::set<std::string> names{out.front().second.name};
    for (const auto& f : files) {
        TopologyGraph g = load_graph_file(f);
        if (!names.insert(g.name).second) config_error("two graphs are named '" + g.name + "' (" + f.string() + ")");
        out.emplace_back(f, std::move(g));
    }
    return out;
}

std::unique_ptr<Workspace> open_project(const ProjectConfig& cfg, std::optional<long long> seed) {
    auto rel = [&](const std::string& p) -> std::optional<fs::path> {
        if (p.empty()) return std::nullopt;
        return cfg.root / p;
    };
    auto ws = assemble(cfg.name, cfg.gateway.mode, cfg.gateway.base_url, rel(cfg.gateway.records),
                       cfg.gateway.mode == "record", rel(cfg.gateway.mimic_profile), seed);
    for (const auto& p : cfg.plugin_paths) ws->plugins.load_plugin(cfg.root / p);
    auto graphs = project_graphs(cfg);
    std::string entry = graphs.front().second.name;
    for (auto& [_, g] : graphs) ws->library.add(std::make_shared<const TopologyGraph>(std::move(g)));
    ws->entry = ws->library.find(entry);
    return ws;
}

std::unique_ptr<Workspace> open_standalone(const fs::path& graph_file, const std::vector<fs::path>& plugin_dirs,
                                           std::optional<long long> seed) {
    TopologyGraph entry = load_graph_file(graph_file);
    auto ws = assemble(entry.name, "mock", "", std::nullopt, false, std::nullopt, seed);
    for (const auto& d : plugin_dirs) {
        if (fs::exists(d / "plugin.json")) ws->plugins.load_plugin(d);
    }
    fs::path dir = graph_file.has_parent_path() ? graph_file.parent_path() : fs::path(".");
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string fname = e.path().filename().string();
        if (!e.is_regular_file() || fname.starts_with(".") || !fname.ends_with(kTopoExtension)) continue;
        if (fs::equivalent(e.path(), graph_file)) continue;
        try {
            ws->library.add(std::make_shared<const TopologyGraph>(load_graph_file(e.path())));
        } catch (const Error&) {
        }
    }
    ws->library.add(std::make_shared<const TopologyGraph>(std::move(entry)));
    ws->entry = ws->library.find(ws->name);
    return ws;
}

std::string iso8601_utc(long long epoch_ms) {
    std::time_t secs = static_cast<std::time_t>(epoch_ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Value package(const ProjectConfig& cfg, const fs::path& out_dir, const std::function<long long()>& clock) {
    auto ws = open_project(cfg);
    Closure c = closure(ws->entry, ws->library, ws->plugins, "");

    std::error_code ec;
    if (fs::exists(out_dir)) {
        bool empty = fs::is_directory(out_dir) && fs::directory_iterator(out_dir) == fs::directory_iterator();
        if (!empty && !fs::exists(out_dir / kBundleFile)) {
            throw Error("IoError", out_dir.string() + " exists and is not a bundle");
        }
        fs::remove_all(out_dir / "graphs", ec);
        fs::remove_all(out_dir / "plugins", ec);
        fs::remove(out_dir / kRecordsFile, ec);
        fs::remove(out_dir / kProfileFile, ec);
    }
    fs::create_directories(out_dir / "graphs");

    Value::Array graphs;
    std::string entry_path;
    for (const auto& g : c.graphs) {
        std::string rel = "graphs/" + graph_file_name(g->name);
        save_graph_file(out_dir / rel, *g, &ws->plugins);
        if (entry_path.empty()) entry_path = rel;
        graphs.emplace_back(rel);
    }
    std::sort(graphs.begin(), graphs.end(), [](const Value& a, const Value& b) { return a.as_string() < b.as_string(); });

    Value::Array plugin_list;
    for (const auto& ns : c.namespaces) {
        auto m = ws->plugins.manifest(ns);
        fs::create_directories(out_dir / "plugins");
        fs::copy(m->dir, out_dir / "plugins" / ns, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
        plugin_list.emplace_back(ns);
    }
    if (!cfg.gateway.records.empty() && fs::exists(cfg.root / cfg.gateway.records)) {
        fs::copy_file(cfg.root / cfg.gateway.records, out_dir / kRecordsFile, fs::copy_options::overwrite_existing);
    }
    if (!cfg.gateway.mimic_profile.empty() && fs::exists(cfg.root / cfg.gateway.mimic_profile)) {
        fs::copy_file(cfg.root / cfg.gateway.mimic_profile, out_dir / kProfileFile,
                      fs::copy_options::overwrite_existing);
    }

    long long now = clock ? clock()
                          : std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count();
    Value::Object bundle{{"name", cfg.name},
                         {"version", cfg.version},
                         {"entry_graph", entry_path},
                         {"graphs", std::move(graphs)},
                         {"plugins", std::move(plugin_list)},
                         {"default_mode", cfg.gateway.mode},
                         {"created_at", iso8601_utc(now)}};
    if (!cfg.gateway.base_url.empty()) bundle.emplace("base_url", cfg.gateway.base_url);
    Value doc(std::move(bundle));
    write_text_file(out_dir / kBundleFile, to_json(doc) + "\n");
    return doc;
}

std::unique_ptr<Workspace> open_bundle(const fs::path& dir, std::optional<long long> seed) {
    fs::path file = dir / kBundleFile;
    if (!fs::exists(file)) throw Error("InvalidBundle", "no " + std::string(kBundleFile) + " in " + dir.string());
    Value doc = read_json_file(file, "InvalidBundle");
    auto field = [&](std::string_view key) {
        const Value* v = doc.find(key);
        if (!v || !v->is_string()) throw Error("InvalidBundle", "bundle.json: '" + std::string(key) + "' must be a string");
        return v->as_string();
    };
    auto list = [&](std::string_view key) {
        const Value* v = doc.find(key);
        std::vector<std::string> out;
        if (!v || !v->is_array()) throw Error("InvalidBundle", "bundle.json: '" + std::string(key) + "' must be an array");
        for (const auto& s : v->as_array()) {
            if (!s.is_string() || s.as_string().find("..") != std::string::npos) {
                throw Error("InvalidBundle", "bundle.json: bad entry in '" + std::string(key) + "'");
            }
            out.push_back(s.as_string());
        }
        return out;
    };
    std::string mode = field("default_mode");
    const Value* base = doc.find("base_url");
    std::unique_ptr<Workspace> ws;
    try {
        ws = assemble(field("name"), mode, base && base->is_string() ? base->as_string() : "", dir / kRecordsFile,
                      mode == "record", dir / kProfileFile, seed);
        for (const auto& ns : list("plugins")) ws->plugins.load_plugin(dir / "plugins" / ns);
        for (const auto& g : list("graphs")) ws->library.add(std::make_shared<const TopologyGraph>(load_graph_file(dir / g)));
        ws->entry = std::make_shared<const TopologyGraph>(load_graph_file(dir / field("entry_graph")));
    } catch (const Error& e) {
        if (e.code() == "InvalidBundle") throw;
        throw Error("InvalidBundle", std::string(e.code()) + ": " + e.what());
    }
    ws->entry = ws->library.find(ws->entry->name);
    if (!ws->entry) throw Error("InvalidBundle", "entry graph is not listed in 'graphs'");
    closure(ws->entry, ws->library, ws->plugins, "InvalidBundle");
    return ws;
}

Value embed_snippet(const std::string& host, int port, const std::string& entry_graph) {
    std::string hp = host + ":" + std::to_string(port);
    return Value::Object{{"endpoint", "tcp://" + hp},
                         {"websocket", "ws://" + hp + "/debug"},
                         {"entry_graph", entry_graph},
                         {"protocol", "ndjson-v1"}};
}

}  // namespace aad::project
