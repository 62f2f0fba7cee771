#include "aad/cli.hpp"

#include <csignal>
#include <iostream>
#include <pthread.h>

#include "CLI11.hpp"
#include "aad/code_sync.hpp"
#include "aad/debugger.hpp"
#include "aad/project.hpp"
#include "aad/savings.hpp"
#include "aad/topo_format.hpp"
#include "aad/trace_check.hpp"

namespace aad::cli {

namespace fs = std::filesystem;

namespace {

#ifndef AAD_DATA_DIR
#define AAD_DATA_DIR "."
#endif

fs::path data_dir() {
    const char* env = std::getenv("AAD_DATA_DIR");
    return env ? fs::path(env) : fs::path(AAD_DATA_DIR);
}

std::vector<fs::path> builtin_plugin_dirs() {
    std::vector<fs::path> out;
    fs::path root = data_dir() / "plugins";
    if (!fs::is_directory(root)) return out;
    for (const auto& e : fs::directory_iterator(root)) {
        if (e.is_directory()) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct Globals {
    bool json = false;
    std::optional<long long> seed;
    std::string project;
};

project::ProjectConfig require_project(const Globals& g, const fs::path& near = fs::current_path()) {
    if (!g.project.empty()) return project::load_project(g.project);
    auto root = project::find_project_root(near);
    if (!root) throw Error("ConfigError", "no project.json at or above " + near.string());
    return project::load_project(*root);
}

/// Project workspace when the graph lives in a project, else a standalone one.
std::unique_ptr<project::Workspace> workspace_for(const Globals& g, const fs::path& graph) {
    std::optional<fs::path> root;
    if (!g.project.empty()) {
        root = g.project;
    } else {
        root = project::find_project_root(graph.has_parent_path() ? graph.parent_path() : fs::path("."));
    }
    if (!root) return project::open_standalone(graph, builtin_plugin_dirs(), g.seed);
    auto ws = project::open_project(project::load_project(*root), g.seed);
    auto entry = std::make_shared<const TopologyGraph>(load_graph_file(graph));
    ws->library.add(entry);
    ws->entry = entry;
    return ws;
}

TopologyGraph load_any(const fs::path& p) {
    std::string name = p.filename().string();
    if (name.ends_with(kScriptExtension)) return parse_script(read_text_file(p));
    return load_graph_file(p);
}

Value parse_json_arg(const std::string& text, const std::string& what) {
    try {
        return parse_json(text);
    } catch (const ParseError& e) {
        throw Error("InvalidInput", what + " is not JSON: " + e.what());
    }
}

void block_signals(sigset_t& set) {
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

void wait_for_signal(sigset_t& set) {
    int sig = 0;
    sigwait(&set, &sig);
}

fs::path ui_dir(const fs::path& bundle) {
    if (fs::is_directory(bundle / "ui")) return bundle / "ui";
    return data_dir() / "ui";
}

std::string replace_suffix(const std::string& s, std::string_view from, std::string_view to) {
    return s.substr(0, s.size() - from.size()) + std::string(to);
}

int cmd_validate(const Globals& g, const std::string& file, std::ostream& out) {
    fs::path p(file);
    TopologyGraph graph = load_any(p);
    plugins::PluginRegistry builtin;
    const ComponentCatalog* catalog = nullptr;
    std::unique_ptr<project::Workspace> ws;
    auto root = g.project.empty() ? project::find_project_root(p.has_parent_path() ? p.parent_path() : ".")
                                  : std::optional<fs::path>(g.project);
    if (root) {
        ws = project::open_project(project::load_project(*root));
        catalog = &ws->plugins;
    } else {
        for (const auto& d : builtin_plugin_dirs()) builtin.load_plugin(d);
        catalog = &builtin;
    }
    auto report = validate(graph, catalog);
    if (g.json) {
        Value::Array issues;
        for (const auto& i : report.issues) {
            issues.push_back(Value::Object{{"code", std::string(to_string(i.code))}, {"ref", i.ref}, {"message", i.message}});
        }
        out << to_json(Value::Object{{"ok", report.ok}, {"issues", std::move(issues)}}) << "\n";
    } else if (report.ok) {
        out << "ok\n";
    } else {
        for (const auto& i : report.issues) out << to_string(i.code) << " " << i.ref << ": " << i.message << "\n";
    }
    return report.ok ? 0 : 2;
}

struct RunArgs {
    std::string graph;
    std::string input = "null";
    std::string trace;
    std::vector<std::string> answers;
    std::string mode;
    std::string records;
    std::string mimic;
};

int cmd_run(const Globals& g, const RunArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
    auto ws = workspace_for(g, a.graph);
    Value input = parse_json_arg(a.input, "--input");
    if (!a.mode.empty()) {
        project::check_mode(a.mode);
        ws->mode = a.mode == "mock" ? llm::Mode::Live : llm::parse_mode(a.mode);
    }
    if (!a.records.empty()) {
        if (fs::exists(a.records)) ws->gateway->records().load(a.records);
        if (ws->mode == llm::Mode::Record) ws->gateway->records().bind_file(a.records);
    }
    if (!a.mimic.empty()) ws->profile = llm::load_mimic_profile(a.mimic);

    runtime::SessionOptions opts = ws->session_options();
    opts.honor_breakpoints = false;
    if (g.seed) opts.session_id = runtime::IdGenerator(static_cast<std::uint64_t>(*g.seed)).next();
    auto session = runtime::start_session(ws->entry, input, opts, ws->services());
    session->set_listener([&](const runtime::TraceEvent& e) {
        if (e.kind != runtime::TraceKind::Display || g.json) return;
        const Value* text = e.data.find("text");
        err << "[" << (e.node ? *e.node : "") << "] " << (text && text->is_string() ? text->as_string() : to_json(e.data))
            << "\n";
    });

    std::size_t next_answer = 0;
    auto write_trace = [&] {
        if (!a.trace.empty()) write_text_file(a.trace, runtime::trace_to_text(session->export_trace()));
    };
    for (;;) {
        runtime::StepOutcome o;
        try {
            o = session->step();
        } catch (...) {
            write_trace();
            throw;
        }
        if (o.kind == runtime::OutcomeKind::Advanced || o.kind == runtime::OutcomeKind::Paused) continue;
        if (o.kind == runtime::OutcomeKind::NeedsInput) {
            std::string answer;
            if (next_answer < a.answers.size()) {
                answer = a.answers[next_answer++];
            } else {
                const Value* q = o.value.find("question");
                err << (q && q->is_string() ? q->as_string() : "input") << "\n";
                if (!std::getline(in, answer)) {
                    write_trace();
                    throw Error("InputRequired", "node '" + o.node + "' needs input and none is left");
                }
            }
            Value v;
            try {
                v = parse_json(answer);
            } catch (const ParseError&) {
                v = answer;
            }
            try {
                session->provide_input(v);
            } catch (...) {
                write_trace();
                throw;
            }
            continue;
        }
        write_trace();
        if (o.kind == runtime::OutcomeKind::Error) throw runtime::SessionFailed(o.error);
        if (g.json) {
            out << to_json(Value::Object{{"session", session->id()},
                                         {"result", o.value},
                                         {"usage", session->usage().to_value()}})
                << "\n";
        } else {
            out << to_json(o.value) << "\n";
        }
        return 0;
    }
}

int cmd_sync(const Globals& g, const std::string& target, std::ostream& out, std::ostream& err) {
    std::string graph_path, script_path;
    if (target.ends_with(kScriptExtension)) {
        script_path = target;
        graph_path = replace_suffix(target, kScriptExtension, kTopoExtension);
    } else if (target.ends_with(kTopoExtension)) {
        graph_path = target;
        script_path = replace_suffix(target, kTopoExtension, kScriptExtension);
    } else {
        throw Error("InvalidInput", "expected a " + std::string(kTopoExtension) + " or " +
                                        std::string(kScriptExtension) + " file");
    }
    fs::path gp(graph_path);
    std::string stem = replace_suffix(gp.filename().string(), kTopoExtension, "");
    fs::path base_path = gp.parent_path() / ("." + stem + ".sync-base" + std::string(kTopoExtension));
    if (!fs::exists(gp)) throw Error("MissingGraph", graph_path + " not found");
    TopologyGraph current = load_graph_file(gp);

    if (!fs::exists(script_path)) {
        write_text_file(script_path, render_script(current));
        write_text_file(base_path, serialize_unchecked(current));
        if (g.json) {
            out << to_json(Value::Object{{"generated", script_path}, {"changes", Value::Array{}}, {"conflicts", Value::Array{}}})
                << "\n";
        } else {
            out << "generated " << script_path << "\n";
        }
        return 0;
    }
    TopologyGraph base = fs::exists(base_path) ? load_graph_file(base_path) : current;
    SyncResult r = sync(base, read_text_file(script_path), &current);
    write_text_file(gp, serialize_unchecked(r.graph));
    write_text_file(script_path, r.script);
    write_text_file(base_path, serialize_unchecked(r.graph));

    if (g.json) {
        Value v = sync_result_to_value(r);
        v.as_object()["graph"] = graph_path;
        v.as_object()["script"] = script_path;
        out << to_json(v) << "\n";
    } else {
        for (const auto& c : r.changes) out << to_string(c.origin) << " " << describe(c.edit) << "\n";
        if (!r.conflicts.empty()) {
            out << "conflicts (text kept):\n";
            for (const auto& c : r.conflicts) {
                out << "  " << (c.node.empty() ? "-" : c.node) << " " << (c.key.empty() ? "-" : c.key)
                    << "  graph=" << to_json(c.graph_value) << "  text=" << to_json(c.text_value) << "\n";
            }
        }
        if (r.changes.empty() && r.conflicts.empty()) out << "in sync\n";
    }
    auto report = validate(r.graph);
    bool invalid = false;
    for (const auto& i : report.issues) {
        if (i.code == IssueCode::UnknownExtension) continue;
        invalid = true;
        err << "warning: " << to_string(i.code) << " " << i.ref << ": " << i.message << "\n";
    }
    return r.conflicts.empty() && !invalid ? 0 : 2;
}

int cmd_package(const Globals& g, const std::string& out_dir, std::ostream& out) {
    auto cfg = require_project(g);
    Value bundle = project::package(cfg, out_dir);
    if (g.json) {
        out << to_json(bundle) << "\n";
    } else {
        out << "packaged " << cfg.name << " " << cfg.version << " -> " << out_dir << " ("
            << bundle.find("graphs")->as_array().size() << " graphs, " << bundle.find("plugins")->as_array().size()
            << " plugins)\n";
    }
    return 0;
}

struct ServeArgs {
    std::string bundle;
    bool dev = false;
    std::string host = "127.0.0.1";
    int port = 0;
    std::string embed;
    std::string input = "null";
};

int cmd_serve(const Globals& g, const ServeArgs& a, std::ostream& out, std::ostream& err) {
    sigset_t set;
    block_signals(set);
    auto ws = project::open_bundle(a.bundle, g.seed);
    runtime::SessionManager sessions(ws->services(), g.seed ? std::optional<std::uint64_t>(*g.seed) : std::nullopt);
    debug::ServerOptions so;
    so.host = a.host;
    so.port = a.port;
    so.dev = a.dev;
    so.default_graph = ws->entry->name;
    so.mode = ws->mode;
    so.mimic_profile = ws->profile;
    if (a.dev) so.static_root = ui_dir(a.bundle);
    debug::Server server(sessions, so);
    server.start();
    Value embed = project::embed_snippet(a.host, server.port(), ws->entry->name);
    fs::path embed_path = a.embed.empty() ? fs::path(a.bundle) / project::kEmbedFile : fs::path(a.embed);
    write_text_file(embed_path, to_json(embed) + "\n");
    out << to_json(embed) << std::endl;
    err << "serving " << ws->name << " on " << a.host << ":" << server.port() << (a.dev ? " (dev)" : "") << std::endl;
    wait_for_signal(set);
    server.stop();
    return 0;
}

int cmd_debug(const Globals& g, const ServeArgs& a, std::ostream& out, std::ostream& err) {
    sigset_t set;
    block_signals(set);
    auto cfg = require_project(g);
    auto ws = project::open_project(cfg, g.seed);
    runtime::SessionManager sessions(ws->services(), g.seed ? std::optional<std::uint64_t>(*g.seed) : std::nullopt);
    auto first = sessions.create(ws->entry, parse_json_arg(a.input, "--input"), ws->session_options());
    debug::ServerOptions so;
    so.host = a.host;
    so.port = a.port >= 0 ? a.port : cfg.debug_port;
    so.dev = true;
    so.default_graph = ws->entry->name;
    so.mode = ws->mode;
    so.mimic_profile = ws->profile;
    so.static_root = ui_dir(cfg.root);
    debug::Server server(sessions, so);
    server.start();
    Value embed = project::embed_snippet(a.host, server.port(), ws->entry->name);
    embed.as_object()["session"] = first->session->id();
    out << to_json(embed) << std::endl;
    err << "debugging " << cfg.name << " on " << a.host << ":" << server.port() << std::endl;
    wait_for_signal(set);
    server.stop();
    return 0;
}

int cmd_plugin_list(const Globals& g, std::ostream& out) {
    plugins::PluginRegistry reg;
    std::optional<fs::path> root =
        g.project.empty() ? project::find_project_root(fs::current_path()) : std::optional<fs::path>(g.project);
    if (root) {
        auto cfg = project::load_project(*root);
        for (const auto& p : cfg.plugin_paths) reg.load_plugin(cfg.root / p);
    } else {
        for (const auto& d : builtin_plugin_dirs()) reg.load_plugin(d);
    }
    auto list = reg.list_components();
    if (g.json) {
        Value::Array a;
        for (const auto& c : list) {
            a.push_back(Value::Object{{"namespace", c.ns}, {"name", c.name}, {"version", c.version}, {"description", c.description}});
        }
        out << to_json(a) << "\n";
        return 0;
    }
    for (const auto& c : list) out << c.ns << "/" << c.name << "  " << c.version << "  " << c.description << "\n";
    return 0;
}

int cmd_plugin_install(const Globals& g, const std::string& path, std::ostream& out) {
    auto cfg = require_project(g);
    plugins::PluginRegistry reg;
    for (const auto& p : cfg.plugin_paths) reg.load_plugin(cfg.root / p);
    auto loaded = reg.load_plugin(path);
    fs::path src = fs::is_directory(path) ? fs::path(path) : fs::path(path).parent_path();
    auto manifest = reg.manifest(loaded.front().first);
    std::string rel = "plugins/" + manifest->ns;
    fs::path dest = cfg.root / rel;
    if (!fs::exists(dest) || !fs::equivalent(src, dest)) {
        std::error_code ec;
        fs::remove_all(dest, ec);
        fs::create_directories(dest);
        fs::copy(src, dest, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    }
    if (std::find(cfg.plugin_paths.begin(), cfg.plugin_paths.end(), rel) == cfg.plugin_paths.end()) {
        Value doc = parse_json(read_text_file(cfg.root / project::kProjectFile));
        Value::Array paths;
        if (const Value* pp = doc.find("plugin_paths"); pp && pp->is_array()) paths = pp->as_array();
        paths.emplace_back(rel);
        doc.as_object()["plugin_paths"] = std::move(paths);
        write_text_file(cfg.root / project::kProjectFile, to_json(doc) + "\n");
    }
    if (g.json) {
        out << to_json(Value::Object{{"namespace", manifest->ns}, {"version", manifest->version.str()}, {"path", rel}}) << "\n";
    } else {
        out << "installed " << manifest->ns << " " << manifest->version.str() << " (" << manifest->components.size()
            << " components) -> " << rel << "\n";
    }
    return 0;
}

int cmd_trace_check(const Globals& g, const std::vector<std::string>& files, std::ostream& out) {
    bool all_ok = true;
    Value::Array results;
    for (const auto& f : files) {
        TraceCheckResult r = check_trace(parse_json(read_text_file(f)));
        all_ok = all_ok && r.ok;
        if (g.json) {
            Value::Array problems;
            for (const auto& p : r.problems) problems.emplace_back(p);
            results.push_back(Value::Object{{"file", f}, {"ok", r.ok}, {"problems", std::move(problems)}});
            continue;
        }
        if (r.ok) {
            out << f << ": ok\n";
        } else {
            for (const auto& p : r.problems) out << f << ": " << p << "\n";
        }
    }
    if (g.json) out << to_json(results) << "\n";
    return all_ok ? 0 : 2;
}

int cmd_mimic_savings(const Globals& g, const std::vector<std::string>& files, const std::vector<std::string>& baseline,
                      std::ostream& out) {
    auto load = [](const std::vector<std::string>& paths) {
        std::vector<TraceUsage> rows;
        for (const auto& p : paths) rows.push_back(trace_usage(parse_json(read_text_file(p)), fs::path(p).filename().string()));
        return rows;
    };
    SavingsReport r = compute_savings(load(files), load(baseline));
    if (g.json) {
        out << to_json(r.to_value()) << "\n";
    } else {
        out << r.table();
    }
    return 0;
}

}  // namespace

int main(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
    CLI::App app{"Agent app toolkit: design, run, debug and deploy topology agents", "aad"};
    app.fallthrough();
    app.require_subcommand(1);
    Globals g;
    long long seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Seed for the mock provider and session ids");
    app.add_flag("--json", g.json, "Print JSON instead of tables");
    app.add_option("--project", g.project, "Project directory (default: nearest project.json)");

    std::string file;
    auto* validate_cmd = app.add_subcommand("validate", "Check a graph or agent script");
    validate_cmd->add_option("graph", file, "Graph (.topo.json) or script (.agent.aad)")->required();

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run a graph to completion");
    run_cmd->add_option("graph", run.graph)->required();
    run_cmd->add_option("--input", run.input, "Input payload as JSON");
    run_cmd->add_option("--trace", run.trace, "Write the trace log here");
    run_cmd->add_option("--answer", run.answers, "Answer for the next AskText/AskChoice (JSON or text)");
    run_cmd->add_option("--mode", run.mode, "Gateway mode: live, record, replay, mimic-first, mock");
    run_cmd->add_option("--records", run.records, "Record store file (records.ndjson)");
    run_cmd->add_option("--mimic", run.mimic, "Mimic profile file");

    ServeArgs debug_args;
    debug_args.port = -1;
    auto* debug_cmd = app.add_subcommand("debug", "Start the debug service on the project");
    debug_cmd->add_option("--port", debug_args.port, "TCP port (default: project debug.port; 0 picks one)");
    debug_cmd->add_option("--host", debug_args.host);
    debug_cmd->add_option("--input", debug_args.input, "Input for the initial session");

    std::string sync_target;
    auto* sync_cmd = app.add_subcommand("sync", "Reconcile a graph with its agent script");
    sync_cmd->add_option("file", sync_target, "Graph or script")->required();

    std::string out_dir;
    auto* package_cmd = app.add_subcommand("package", "Package the project into a bundle");
    package_cmd->add_option("--out", out_dir, "Bundle directory")->required();

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a bundle");
    serve_cmd->add_option("bundle", serve.bundle)->required();
    serve_cmd->add_flag("--dev", serve.dev, "Allow breakpoints, stepping and mimic control");
    serve_cmd->add_option("--port", serve.port);
    serve_cmd->add_option("--host", serve.host);
    serve_cmd->add_option("--embed", serve.embed, "Where to write embed.json (default: in the bundle)");

    auto* plugin_cmd = app.add_subcommand("plugin", "Plugin catalog");
    plugin_cmd->require_subcommand(1);
    auto* plugin_list = plugin_cmd->add_subcommand("list", "List components");
    std::string plugin_path;
    auto* plugin_install = plugin_cmd->add_subcommand("install", "Install a plugin into the project");
    plugin_install->add_option("path", plugin_path)->required();

    std::vector<std::string> files, baseline;
    auto* trace_cmd = app.add_subcommand("trace", "Trace logs");
    trace_cmd->require_subcommand(1);
    auto* trace_check_cmd = trace_cmd->add_subcommand("check", "Check trace well-formedness");
    trace_check_cmd->add_option("files", files)->required();

    auto* mimic_cmd = app.add_subcommand("mimic", "Mimic and replay accounting");
    mimic_cmd->require_subcommand(1);
    auto* savings_cmd = mimic_cmd->add_subcommand("savings", "Usage and savings from trace logs");
    savings_cmd->add_option("traces", files)->required();
    savings_cmd->add_option("--baseline", baseline, "Traces of the all-live baseline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << "error: Usage: " << e.what() << "\n" << sub->help();
        return 1;
    }
    if (seed_opt->count() > 0) g.seed = seed;

    try {
        if (*validate_cmd) return cmd_validate(g, file, out);
        if (*run_cmd) return cmd_run(g, run, in, out, err);
        if (*debug_cmd) return cmd_debug(g, debug_args, out, err);
        if (*sync_cmd) return cmd_sync(g, sync_target, out, err);
        if (*package_cmd) return cmd_package(g, out_dir, out);
        if (*serve_cmd) return cmd_serve(g, serve, out, err);
        if (*plugin_list) return cmd_plugin_list(g, out);
        if (*plugin_install) return cmd_plugin_install(g, plugin_path, out);
        if (*trace_check_cmd) return cmd_trace_check(g, files, out);
        if (*savings_cmd) return cmd_mimic_savings(g, files, baseline, out);
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: " << e.code() << ": " << msg << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: InternalError: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace aad::cli
