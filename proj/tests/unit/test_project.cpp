#include <random>

#include "aad/project.hpp"
#include "aad/savings.hpp"
#include "aad/topo_format.hpp"
#include "doctest.h"

using namespace aad;
namespace fs = std::filesystem;

namespace {

fs::path sample(const std::string& name) { return fs::path(AAD_SOURCE_DIR) / "samples" / name; }

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("aad-project-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

Value no_input(const Value&) { return nullptr; }

Value event(const std::string& source, long long prompt, long long completion) {
    return Value::Object{{"kind", "LlmCall"},
                         {"data", Value::Object{{"source", source},
                                                {"usage", Value::Object{{"prompt_tokens", prompt},
                                                                        {"completion_tokens", completion}}}}}};
}

}  // namespace

TEST_CASE("project config") {
    auto cfg = project::load_project(sample("webagent"));
    CHECK(cfg.name == "webagent");
    CHECK(cfg.entry_graph == "graphs/webagent.topo.json");
    CHECK(cfg.plugin_paths == std::vector<std::string>{"plugins/simweb"});
    CHECK(cfg.gateway.mode == "mock");
    CHECK(cfg.debug_port == 7777);
    CHECK(project::project_to_value(cfg).find("gateway")->find("mode")->as_string() == "mock");
    auto root = project::find_project_root(sample("webagent") / "graphs");
    REQUIRE(root);
    CHECK(fs::equivalent(*root, sample("webagent")));

    TempDir t;
    CHECK_THROWS_WITH_AS(project::load_project(t.path), doctest::Contains("project.json"), Error);
    write_text_file(t.path / "project.json", R"({"name": "x", "entry_graph": "g.topo.json", "gateway": {"mode": "warp"}})");
    try {
        project::load_project(t.path);
        FAIL("accepted an unknown mode");
    } catch (const Error& e) {
        CHECK(e.code() == "ConfigError");
    }
    for (const char* m : {"live", "record", "replay", "mimic-first", "mock"}) CHECK_NOTHROW(project::check_mode(m));
    write_text_file(t.path / "project.json", R"({"name": "x", "entry_graph": "g.topo.json"})");
    try {
        project::open_project(project::load_project(t.path));
        FAIL("opened a project without its entry graph");
    } catch (const Error& e) {
        CHECK(e.code() == "MissingGraph");
    }
}

TEST_CASE("open_project loads sub-agents and plugins") {
    auto ws = project::open_project(project::load_project(sample("branch-loop")), 7);
    CHECK(ws->entry->name == "branch_loop");
    CHECK(ws->library.names() == std::vector<std::string>{"branch_loop", "double"});
    auto s = runtime::start_session(ws->entry, Value::Array{4, 5}, ws->session_options(), ws->services());
    CHECK(s->run_to_completion(no_input) == Value(Value::Object{{"count", 2}, {"doubled", Value::Array{8, 10}}}));

    auto web = project::open_project(project::load_project(sample("webagent")));
    CHECK(web->plugins.list_components().size() == 20);
}

TEST_CASE("package and reopen a bundle") {
    TempDir t;
    fs::path out = t.path / "bundle";
    auto cfg = project::load_project(sample("webagent"));
    Value b = project::package(cfg, out, [] { return 86400000LL; });
    CHECK(b.find("name")->as_string() == "webagent");
    CHECK(b.find("version")->as_string() == "0.1.0");
    CHECK(b.find("entry_graph")->as_string() == "graphs/webagent.topo.json");
    CHECK(*b.find("plugins") == Value(Value::Array{"simweb"}));
    CHECK(b.find("default_mode")->as_string() == "mock");
    CHECK(b.find("created_at")->as_string() == "1970-01-02T00:00:00Z");
    CHECK(fs::exists(out / "plugins" / "simweb" / "plugin.json"));
    CHECK(parse_json(read_text_file(out / "bundle.json")) == b);

    fs::path moved = t.path / "elsewhere";
    fs::rename(out, moved);
    auto ws = project::open_bundle(moved);
    auto s = runtime::start_session(ws->entry, Value::Object{{"link", "nav_products"}, {"table", "prices"}},
                                    ws->session_options(), ws->services());
    CHECK(s->run_to_completion(no_input).find("rows")->as_array().size() == 3);

    SUBCASE("packaging over a bundle replaces it") {
        CHECK_NOTHROW(project::package(cfg, moved));
    }
    SUBCASE("packaging into a foreign directory is refused") {
        fs::create_directories(t.path / "busy");
        write_text_file(t.path / "busy" / "notes.txt", "keep me");
        CHECK_THROWS_AS(project::package(cfg, t.path / "busy"), Error);
        CHECK(read_text_file(t.path / "busy" / "notes.txt") == "keep me");
    }
    SUBCASE("a damaged bundle is rejected") {
        fs::remove_all(moved / "plugins");
        try {
            project::open_bundle(moved);
            FAIL("opened a bundle without its plugin");
        } catch (const Error& e) {
            CHECK(e.code() == "InvalidBundle");
        }
    }
}

TEST_CASE("package closure") {
    TempDir t;
    fs::copy(sample("branch-loop"), t.path, fs::copy_options::recursive);
    fs::remove(t.path / "graphs" / "double.topo.json");
    try {
        project::package(project::load_project(t.path), t.path / "out");
        FAIL("packaged a dangling sub-agent");
    } catch (const Error& e) {
        CHECK(e.code() == "UnresolvedSubAgent");
    }

    TempDir w;
    fs::copy(sample("webagent"), w.path, fs::copy_options::recursive);
    write_text_file(w.path / "project.json", R"({"name": "web", "entry_graph": "graphs/webagent.topo.json"})");
    try {
        project::package(project::load_project(w.path), w.path / "out");
        FAIL("packaged without the plugin");
    } catch (const Error& e) {
        CHECK(e.code() == "UnresolvedPlugin");
    }
    CHECK_FALSE(fs::exists(w.path / "out" / "bundle.json"));
}

TEST_CASE("embed snippet") {
    Value e = project::embed_snippet("127.0.0.1", 4242, "storywriter");
    CHECK(e.find("endpoint")->as_string() == "tcp://127.0.0.1:4242");
    CHECK(e.find("websocket")->as_string() == "ws://127.0.0.1:4242/debug");
    CHECK(e.find("entry_graph")->as_string() == "storywriter");
    CHECK(e.find("protocol")->as_string() == "ndjson-v1");
}

TEST_CASE("savings from traces") {
    // Oracle: per-trace sums over LlmCall events; reductions are 1 - treated/baseline.
    Value live = Value::Object{{"session", "a"},
                               {"events", Value::Array{event("Live", 10, 5), event("Mock", 3, 2), Value::Object{{"kind", "NodeEnter"}}}}};
    Value served = Value::Object{{"session", "b"}, {"events", Value::Array{event("Replay", 10, 5), event("Mimic", 3, 2)}}};
    TraceUsage u = trace_usage(live, "a");
    CHECK(u.calls == 2);
    CHECK(u.live_calls == 2);
    CHECK(u.billed_tokens == 20);
    TraceUsage v = trace_usage(served, "b");
    CHECK(v.served_calls == 2);
    CHECK(v.saved_tokens == 20);
    CHECK(v.billed_tokens == 0);

    SavingsReport alone = compute_savings({u, v});
    CHECK(alone.total.calls == 4);
    CHECK(alone.token_reduction == doctest::Approx(0.5));
    CHECK(alone.live_call_reduction == doctest::Approx(0.5));

    SavingsReport against = compute_savings({u, v}, {u, u});
    CHECK(against.has_baseline);
    CHECK(against.token_reduction == doctest::Approx(1.0 - 20.0 / 40.0));
    CHECK(against.live_call_reduction == doctest::Approx(1.0 - 2.0 / 4.0));
    CHECK(against.to_value().find("baseline_total")->find("live_calls")->as_number() == 4);
    CHECK(against.table().find("token reduction") != std::string::npos);

    CHECK_THROWS_AS(trace_usage(Value::Object{}), Error);
}
