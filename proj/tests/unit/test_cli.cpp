#include <random>
#include <sstream>

#include "aad/cli.hpp"
#include "aad/code_sync.hpp"
#include "aad/debugger.hpp"
#include "aad/topo_format.hpp"
#include "background.hpp"
#include "doctest.h"

using namespace aad;
namespace fs = std::filesystem;

namespace {

fs::path sample(const std::string& name) { return fs::path(AAD_SOURCE_DIR) / "samples" / name; }

struct TempDir {
    fs::path path;
    TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() / ("aad-cli-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args, const std::string& stdin_text = "") {
    args.insert(args.begin(), "aad");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::istringstream in(stdin_text);
    std::ostringstream out, err;
    int code = aad::cli::main(static_cast<int>(argv.size()), argv.data(), in, out, err);
    return {code, out.str(), err.str()};
}

std::string graph_of(const std::string& project, const std::string& name) {
    return (sample(project) / "graphs" / (name + ".topo.json")).string();
}

std::string strip_ts(std::string text) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto at = text.find(",\"ts\":", i);
        if (at == std::string::npos) {
            out += text.substr(i);
            break;
        }
        out += text.substr(i, at - i);
        i = at + 6;
        while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    }
    return out;
}

const std::string kStoryInput = R"({"topic": "otters", "edits": 1})";

}  // namespace

TEST_CASE("validate") {
    auto r = run_cli({"validate", graph_of("hello", "hello")});
    CHECK(r.code == 0);
    CHECK(r.out == "ok\n");

    TempDir t;
    TopologyGraph g = load_graph_file(graph_of("hello", "hello"));
    g.nodes.erase(std::remove_if(g.nodes.begin(), g.nodes.end(), [](const Node& n) { return n.id == "end"; }),
                  g.nodes.end());
    g.edges.pop_back();
    g.edges.erase(std::remove_if(g.edges.begin(), g.edges.end(), [](const Edge& e) { return e.to.node == "end"; }),
                  g.edges.end());
    write_text_file(t.path / "broken.topo.json", serialize_unchecked(g));
    r = run_cli({"validate", (t.path / "broken.topo.json").string()});
    CHECK(r.code == 2);
    CHECK(r.out.find("MissingEnd") != std::string::npos);
    r = run_cli({"--json", "validate", (t.path / "broken.topo.json").string()});
    CHECK(parse_json(r.out).find("ok")->as_bool() == false);

    write_text_file(t.path / "hello.agent.aad", "#aad agent \"hello\" v1\n#aad node s kind=Start\n#aad end\n"
                                                "#aad node e kind=End\n#aad end\n#aad wire s.out -> e.in\n");
    CHECK(run_cli({"validate", (t.path / "hello.agent.aad").string()}).code == 0);

    r = run_cli({"validate", (t.path / "missing.topo.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.starts_with("error: IoError: "));
    CHECK(run_cli({"validate", graph_of("webagent", "webagent")}).code == 0);
}

TEST_CASE("run") {
    auto r = run_cli({"run", graph_of("hello", "hello"), "--input", "\"Bob\""});
    CHECK(r.code == 0);
    CHECK(r.out == "\"Hi Bob\"\n");

    r = run_cli({"run", graph_of("hello", "hello"), "--input", "{oops"});
    CHECK(r.code == 1);
    CHECK(r.err.starts_with("error: InvalidInput: "));

    r = run_cli({"run", graph_of("branch-loop", "branch_loop"), "--input", "[1, 2, 3]"});
    CHECK(parse_json(r.out) == Value(Value::Object{{"count", 3}, {"doubled", Value::Array{2, 4, 6}}}));

    r = run_cli({"run", graph_of("branch-loop", "branch_loop"), "--input", "\"abc\""});
    CHECK(r.code == 1);
    CHECK(r.err.starts_with("error: TypeMismatch: "));

    r = run_cli({"run", graph_of("storywriter-mini", "storywriter"), "--input", kStoryInput});
    CHECK(r.code == 1);
    CHECK(r.err.find("error: InputRequired: ") != std::string::npos);

    r = run_cli({"run", graph_of("storywriter-mini", "storywriter"), "--input", kStoryInput}, "moral\n");
    CHECK(r.code == 0);
    CHECK(parse_json(r.out).find("story")->as_string().ends_with("The moral: be kind to otters."));
    CHECK(r.err.find("Edit round 1") != std::string::npos);
    CHECK(r.err.find("[show] Finished a story") != std::string::npos);

    r = run_cli({"--json", "run", graph_of("webagent", "webagent"), "--input", R"({"link": "nav_contact", "table": "prices"})"});
    CHECK(r.code == 0);
    CHECK(parse_json(r.out).find("result")->find("error")->as_string() == "HandlerError");
}

TEST_CASE("run --seed --trace is reproducible") {
    TempDir t;
    std::vector<std::string> texts;
    for (int i = 0; i < 2; ++i) {
        std::string trace = (t.path / ("run" + std::to_string(i) + ".trace.json")).string();
        auto r = run_cli({"--seed", "7", "run", graph_of("storywriter-mini", "storywriter"), "--input", kStoryInput,
                      "--answer", "keep", "--trace", trace});
        REQUIRE(r.code == 0);
        texts.push_back(read_text_file(trace));
        CHECK(run_cli({"trace", "check", trace}).code == 0);
    }
    CHECK(texts[0] != strip_ts(texts[0]));
    CHECK(strip_ts(texts[0]) == strip_ts(texts[1]));
}

TEST_CASE("record, replay and savings") {
    TempDir t;
    std::string records = (t.path / "records.ndjson").string();
    std::vector<std::string> traces;
    for (const char* mode : {"record", "replay", "mimic-first"}) {
        std::string trace = (t.path / (std::string(mode) + ".trace.json")).string();
        auto r = run_cli({"run", graph_of("storywriter-mini", "storywriter"), "--input", kStoryInput, "--answer", "keep",
                      "--mode", mode, "--records", records, "--trace", trace});
        REQUIRE(r.code == 0);
        traces.push_back(trace);
    }
    std::string base = (t.path / "base.trace.json").string();
    REQUIRE(run_cli({"run", graph_of("storywriter-mini", "storywriter"), "--input", kStoryInput, "--answer", "keep",
                 "--trace", base})
                .code == 0);

    auto r = run_cli({"--json", "mimic", "savings", traces[1], traces[2], "--baseline", base, base});
    REQUIRE(r.code == 0);
    Value v = parse_json(r.out);
    CHECK(v.find("token_reduction")->as_number() == doctest::Approx(1.0));
    CHECK(v.find("live_call_reduction")->as_number() == doctest::Approx(1.0));
    r = run_cli({"mimic", "savings", traces[0], traces[1]});
    CHECK(r.out.find("live-call reduction 0.5000") != std::string::npos);

    r = run_cli({"run", graph_of("storywriter-mini", "storywriter"), "--input", R"({"topic": "bats", "edits": 0})",
             "--mode", "replay", "--records", records});
    CHECK(r.code == 0);
    CHECK(parse_json(r.out).as_string().starts_with("story failed: ReplayMiss: "));
}

TEST_CASE("trace check flags broken logs") {
    TempDir t;
    std::string trace = (t.path / "t.trace.json").string();
    REQUIRE(run_cli({"run", graph_of("hello", "hello"), "--input", "1", "--trace", trace}).code == 0);
    Value doc = parse_json(read_text_file(trace));
    doc.as_object()["events"].as_array().erase(doc.as_object()["events"].as_array().begin() + 2);
    write_text_file(trace, to_json(doc));
    auto r = run_cli({"trace", "check", trace});
    CHECK(r.code == 2);
    CHECK(r.out.find("seq") != std::string::npos);
    r = run_cli({"--json", "trace", "check", trace});
    CHECK(parse_json(r.out).as_array().front().find("ok")->as_bool() == false);
}

TEST_CASE("sync") {
    TempDir t;
    fs::copy(sample("hello"), t.path, fs::copy_options::recursive);
    std::string graph = (t.path / "graphs" / "hello.topo.json").string();
    std::string script = (t.path / "graphs" / "hello.agent.aad").string();
    auto r = run_cli({"sync", graph});
    CHECK(r.code == 0);
    CHECK(r.out == "generated " + script + "\n");
    CHECK(parse_script(read_text_file(script)) == load_graph_file(graph));

    std::string text = read_text_file(script);
    text.replace(text.find("Hi {payload}"), 12, "Hey {payload}");
    write_text_file(script, text);
    r = run_cli({"sync", script});
    CHECK(r.code == 0);
    CHECK(r.out == "FromText SetConfig greet.template = \"Hey {payload}\"\n");
    CHECK(run_cli({"run", graph, "--input", "\"Bo\""}).out == "\"Hey Bo\"\n");
    CHECK(run_cli({"sync", graph}).out == "in sync\n");

    write_text_file(script, read_text_file(script).replace(read_text_file(script).find("Hey"), 3, "Yo"));
    std::string g = read_text_file(graph);
    write_text_file(graph, g.replace(g.find("Hey"), 3, "Hiya"));
    r = run_cli({"--json", "sync", graph});
    CHECK(r.code == 2);
    Value v = parse_json(r.out);
    REQUIRE(v.find("conflicts")->as_array().size() == 1);
    CHECK(v.find("conflicts")->as_array()[0].find("key")->as_string() == "template");
    CHECK(run_cli({"run", graph, "--input", "\"Bo\""}).out == "\"Yo Bo\"\n");

    write_text_file(script, "#aad agent \"hello\" v1\n#aad bogus\n");
    r = run_cli({"sync", script});
    CHECK(r.code == 1);
    CHECK(r.err.starts_with("error: ParseError: "));
    CHECK(run_cli({"sync", (t.path / "project.json").string()}).code == 1);
}

TEST_CASE("plugins") {
    auto r = run_cli({"--project", sample("webagent").string(), "plugin", "list"});
    CHECK(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 20);
    CHECK(r.out.find("simweb/extract_table  1.0.0") != std::string::npos);

    TempDir t;
    fs::copy(sample("hello"), t.path, fs::copy_options::recursive);
    r = run_cli({"--project", t.path.string(), "plugin", "list"});
    CHECK(r.out.empty());
    r = run_cli({"--project", t.path.string(), "plugin", "install", (sample("webagent") / "plugins" / "simweb").string()});
    CHECK(r.code == 0);
    CHECK(r.out == "installed simweb 1.0.0 (20 components) -> plugins/simweb\n");
    CHECK(fs::exists(t.path / "plugins" / "simweb" / "site.json"));
    r = run_cli({"--json", "--project", t.path.string(), "plugin", "list"});
    CHECK(parse_json(r.out).as_array().size() == 20);
    r = run_cli({"--project", t.path.string(), "plugin", "install", (t.path / "nowhere").string()});
    CHECK(r.code == 1);
    CHECK(r.err.starts_with("error: ManifestError: "));
}

TEST_CASE("usage errors") {
    CHECK(run_cli({"--help"}).code == 0);
    auto r = run_cli({"frobnicate"});
    CHECK(r.code == 1);
    CHECK(r.err.starts_with("error: "));
    CHECK(run_cli({"run"}).code == 1);
    CHECK(run_cli({"trace"}).code == 1);
    r = run_cli({"package", "--out", "/tmp/x", "--project", "/nonexistent-project"});
    CHECK(r.code == 1);
    CHECK(r.err.starts_with("error: ConfigError: "));
}

TEST_CASE("package and serve from a clean directory") {
    TempDir t;
    fs::path bundle = t.path / "bundle";
    auto r = run_cli({"--project", sample("storywriter-mini").string(), "package", "--out", bundle.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.starts_with("packaged storywriter-mini 0.1.0"));

    fs::path clean = t.path / "clean";
    fs::create_directories(clean);
    testsupport::Background srv({AAD_CLI_PATH, "serve", bundle.string(), "--port", "0"}, clean.string());
    std::string line = srv.read_line();
    REQUIRE_FALSE(line.empty());
    Value embed = parse_json(line);
    CHECK(parse_json(read_text_file(bundle / "embed.json")) == embed);
    CHECK(embed.find("protocol")->as_string() == "ndjson-v1");
    std::string endpoint = embed.find("endpoint")->as_string();
    int port = std::stoi(endpoint.substr(endpoint.rfind(':') + 1));

    debug::Client c("127.0.0.1", port);
    Value started = c.request("start", "", Value::Object{{"input", parse_json(kStoryInput)}});
    REQUIRE(started.find("ok")->as_bool());
    std::string id = started.find("result")->find("session")->as_string();
    CHECK(c.request("set_breakpoint", id, Value::Object{{"node", "cover"}}).find("error")->as_string() == "forbidden");
    Value done = c.request("provide_input", id, Value::Object{{"value", "keep"}});
    CHECK(done.find("result")->find("status")->find("state")->as_string() == "Finished");
    CHECK(srv.terminate() == 0);
}

TEST_CASE("debug service on a project") {
    testsupport::Background dbg({AAD_CLI_PATH, "--project", sample("branch-loop").string(), "debug", "--port", "0",
                                 "--input", "[5]"});
    std::string line = dbg.read_line();
    REQUIRE_FALSE(line.empty());
    Value embed = parse_json(line);
    std::string endpoint = embed.find("endpoint")->as_string();
    debug::Client c("127.0.0.1", std::stoi(endpoint.substr(endpoint.rfind(':') + 1)));
    std::string id = embed.find("session")->as_string();
    Value r = c.request("attach", id);
    CHECK(r.find("result")->find("mode")->as_string() == "dev");
    CHECK(c.request("set_breakpoint", id, Value::Object{{"node", "total"}}).find("ok")->as_bool());
    r = c.request("continue", id);
    CHECK(r.find("result")->find("status")->find("node")->as_string() == "total");
    r = c.request("continue", id);
    CHECK(*r.find("result")->find("status")->find("result") ==
          Value(Value::Object{{"count", 1}, {"doubled", Value::Array{10}}}));
    CHECK(dbg.terminate() == 0);
}
