#include <filesystem>

#include "doctest.h"
#include "graph_gen.hpp"
#include "reference.hpp"
#include "aad/runtime.hpp"
#include "aad/topo_format.hpp"
#include "aad/trace_check.hpp"

using namespace aad;
using namespace aad::runtime;

namespace {

using G = std::shared_ptr<const TopologyGraph>;

// Start -> mids... -> End, each mid wired out->in.
G chain(std::vector<Node> mids, Value::Object end_cfg = {}) {
    TopologyGraph g;
    g.name = "chain";
    g.entry = "start";
    g.nodes.push_back(make_node("start", NodeKind::Start));
    std::string prev = "start";
    for (auto& m : mids) {
        g.edges.push_back({{prev, "out"}, {m.id, "in"}});
        prev = m.id;
        g.nodes.push_back(std::move(m));
    }
    g.nodes.push_back(make_node("end", NodeKind::End, std::move(end_cfg)));
    g.edges.push_back({{prev, "out"}, {"end", "in"}});
    return std::make_shared<const TopologyGraph>(std::move(g));
}

G loop_graph(const std::string& body_expr) {
    TopologyGraph g;
    g.name = "loop";
    g.entry = "start";
    g.nodes = {make_node("start", NodeKind::Start), make_node("L", NodeKind::ArrayLoop),
               make_node("c", NodeKind::Code, {{"expr", body_expr}}), make_node("end", NodeKind::End)};
    g.edges = {{{"start", "out"}, {"L", "in"}},
               {{"L", "body"}, {"c", "in"}},
               {{"c", "out"}, {"L", "loopback"}},
               {{"L", "done"}, {"end", "in"}}};
    return std::make_shared<const TopologyGraph>(std::move(g));
}

G guarded(const std::string& expr) {
    TopologyGraph g;
    g.name = "guard";
    g.entry = "start";
    g.nodes = {make_node("start", NodeKind::Start), make_node("h", NodeKind::ErrorHandler),
               make_node("div", NodeKind::Code, {{"expr", expr}}), make_node("ok", NodeKind::End),
               make_node("msg", NodeKind::Prompt, {{"template", "err: {payload.kind}"}}),
               make_node("bad", NodeKind::End)};
    g.edges = {{{"start", "out"}, {"h", "in"}},
               {{"h", "try"}, {"div", "in"}},
               {{"div", "out"}, {"ok", "in"}},
               {{"h", "catch"}, {"msg", "in"}},
               {{"msg", "out"}, {"bad", "in"}}};
    return std::make_shared<const TopologyGraph>(std::move(g));
}

Value no_input(const Value&) { return nullptr; }

std::vector<std::string> kinds(const Session& s) {
    std::vector<std::string> out;
    for (const auto& e : s.trace()) out.push_back(std::string(to_string(e.kind)));
    return out;
}

long long fixed_clock() { return 1700000000000; }

SessionOptions opts_with(std::set<std::string> bps = {}) {
    SessionOptions o;
    o.breakpoints = std::move(bps);
    o.clock = fixed_clock;
    return o;
}

}  // namespace

TEST_CASE("start_session") {
    auto g = chain({make_node("c", NodeKind::Connector)});
    auto s = start_session(g, 5, opts_with({"c"}), {});
    CHECK(s->status().kind == StatusKind::Ready);
    REQUIRE(s->frames().size() == 1);
    CHECK(s->frames()[0].kind == FrameKind::Root);
    CHECK(s->frames()[0].node == "start");
    CHECK(s->breakpoints().count("c") == 1);
    CHECK(s->id().size() == 36);
    CHECK(kinds(*s) == std::vector<std::string>{"SessionStart"});

    TopologyGraph bad;
    try {
        start_session(std::make_shared<const TopologyGraph>(bad), 1, {}, {});
        FAIL("started invalid graph");
    } catch (const Error& e) {
        CHECK(e.code() == "InvalidGraph");
    }
}

TEST_CASE("stepping a prompt chain") {
    auto g = chain({make_node("p", NodeKind::Prompt, {{"template", "Hi {payload}"}})});
    auto s = start_session(g, "Bob", opts_with(), {});
    CHECK(s->step().kind == OutcomeKind::Advanced);
    auto second = s->step();
    CHECK(second.kind == OutcomeKind::Advanced);
    CHECK(second.node == "p");
    auto last = s->step();
    CHECK(last.kind == OutcomeKind::Done);
    CHECK(last.value == Value("Hi Bob"));
    CHECK(s->status().kind == StatusKind::Finished);
    try {
        s->step();
        FAIL("stepped a finished session");
    } catch (const Error& e) {
        CHECK(e.code() == "IllegalState");
    }
}

TEST_CASE("three-node trace has eight events") {
    auto g = chain({make_node("p", NodeKind::Prompt, {{"template", "Hi {payload}"}})});
    auto s = start_session(g, "Bob", opts_with(), {});
    s->run_to_completion(no_input);
    auto oracle = testsupport::reference_run(*g, "Bob");
    REQUIRE(oracle.executed == 3);
    CHECK(s->trace().size() == static_cast<std::size_t>(1 + 2 * oracle.executed + 1));
    CHECK(kinds(*s) == std::vector<std::string>{"SessionStart", "NodeEnter", "NodeExit", "NodeEnter", "NodeExit",
                                                "NodeEnter", "NodeExit", "SessionEnd"});
    for (std::size_t i = 0; i < s->trace().size(); ++i) CHECK(s->trace()[i].seq == static_cast<long long>(i));
    Value doc = s->export_trace();
    CHECK(doc == s->export_trace());
    CHECK(*doc.find("graph_name") == Value("chain"));
    CHECK(check_trace(doc).ok);
}

TEST_CASE("branch and loop semantics") {
    SUBCASE("then port") {
        TopologyGraph g;
        g.name = "br";
        g.entry = "start";
        g.nodes = {make_node("start", NodeKind::Start),
                   make_node("b", NodeKind::Branch,
                             {{"cases", Value::Array{Value::Object{{"port", "then"}, {"cond", "payload > 0"}}}}}),
                   make_node("pos", NodeKind::End, {{"result", "\"pos\""}}),
                   make_node("neg", NodeKind::End, {{"result", "\"neg\""}})};
        g.edges = {{{"start", "out"}, {"b", "in"}}, {{"b", "then"}, {"pos", "in"}}, {{"b", "else"}, {"neg", "in"}}};
        auto gp = std::make_shared<const TopologyGraph>(g);
        CHECK(start_session(gp, 1, {}, {})->run_to_completion(no_input) == Value("pos"));
        CHECK(start_session(gp, -1, {}, {})->run_to_completion(no_input) == Value("neg"));
        try {
            start_session(gp, "x", {}, {})->run_to_completion(no_input);
            FAIL("compared string with number");
        } catch (const SessionFailed& e) {
            CHECK(e.record().kind == "TypeMismatch");
        }
        g.edges.pop_back();
        g.nodes.pop_back();
        try {
            start_session(std::make_shared<const TopologyGraph>(g), -1, {}, {})->run_to_completion(no_input);
            FAIL("routed to unwired else");
        } catch (const SessionFailed& e) {
            CHECK(e.record().kind == "RouteMissing");
            CHECK(e.record().node == "b");
        }
    }
    SUBCASE("loop doubles items") {
        auto g = loop_graph("item * 2");
        Value got = start_session(g, Value::Array{1, 2, 3}, {}, {})->run_to_completion(no_input);
        CHECK(got == Value(Value::Array{2, 4, 6}));
        CHECK(got == testsupport::reference_run(*g, Value::Array{1, 2, 3}).value);
        CHECK(start_session(g, Value::Array{}, {}, {})->run_to_completion(no_input) == Value(Value::Array{}));
    }
    SUBCASE("inspect inside the second iteration") {
        auto g = loop_graph("item + index");
        auto s = start_session(g, Value::Array{10, 20, 30}, opts_with({"c"}), {});
        CHECK(s->step().kind == OutcomeKind::Advanced);  // start
        CHECK(s->step().kind == OutcomeKind::Paused);    // L pushes iteration 0, pauses before c
        CHECK(s->depth() == 2);
        CHECK(s->step().kind == OutcomeKind::Paused);    // c runs, iteration 1 paused before c
        auto frames = s->frames();
        REQUIRE(frames.size() == 2);
        CHECK(frames.back().kind == FrameKind::LoopBody);
        CHECK(frames.back().index == 1);
        CHECK(frames.back().env.at("item") == Value(20));
        CHECK(frames.back().env.at("index") == Value(1));
        Value snap = s->inspect();
        CHECK(snap.find("frames")->as_array().back().find("env")->find("item")->as_number() == 20);
        CHECK(s->run_to_completion(no_input) == Value(Value::Array{10, 21, 32}));
    }
    SUBCASE("non-array loop input") {
        try {
            start_session(loop_graph("item"), 3, {}, {})->run_to_completion(no_input);
            FAIL("looped over a number");
        } catch (const SessionFailed& e) {
            CHECK(e.record().kind == "TypeMismatch");
            CHECK(e.record().node == "L");
        }
    }
}

TEST_CASE("errors and handlers") {
    SUBCASE("uncaught division by zero") {
        auto s = start_session(chain({make_node("div", NodeKind::Code, {{"expr", "10 % 0"}})}), 1, opts_with(), {});
        try {
            s->run_to_completion(no_input);
            FAIL("divided by zero");
        } catch (const SessionFailed& e) {
            CHECK(e.record().kind == "DivByZero");
            CHECK(e.record().node == "div");
        }
        CHECK(s->status().kind == StatusKind::Failed);
        CHECK(check_trace(s->export_trace()).ok);
    }
    SUBCASE("caught by a handler") {
        auto g = guarded("10 % 0");
        auto s = start_session(g, 1, opts_with(), {});
        CHECK(s->run_to_completion(no_input) == Value("err: DivByZero"));
        CHECK(testsupport::reference_run(*g, 1).value == Value("err: DivByZero"));
        auto k = kinds(*s);
        auto raised = std::find(k.begin(), k.end(), "ErrorRaised");
        auto caught = std::find(k.begin(), k.end(), "ErrorCaught");
        REQUIRE(raised != k.end());
        REQUIRE(caught != k.end());
        CHECK(raised < caught);
        CHECK(s->trace()[static_cast<std::size_t>(caught - k.begin())].node == std::optional<std::string>("h"));
    }
    SUBCASE("step outcome when caught is Advanced") {
        auto s = start_session(guarded("10 % 0"), 1, opts_with(), {});
        s->step();
        s->step();
        auto o = s->step();
        CHECK(o.kind == OutcomeKind::Advanced);
        CHECK(o.node == "div");
        CHECK(s->current_node() == "msg");
    }
    SUBCASE("error inside a loop body unwinds to the outer handler") {
        TopologyGraph g;
        g.name = "nested";
        g.entry = "start";
        g.nodes = {make_node("start", NodeKind::Start), make_node("h", NodeKind::ErrorHandler),
                   make_node("L", NodeKind::ArrayLoop), make_node("c", NodeKind::Code, {{"expr", "10 / item"}}),
                   make_node("ok", NodeKind::End), make_node("bad", NodeKind::End, {{"result", "payload.node"}})};
        g.edges = {{{"start", "out"}, {"h", "in"}},   {{"h", "try"}, {"L", "in"}},   {{"L", "body"}, {"c", "in"}},
                   {{"c", "out"}, {"L", "loopback"}}, {{"L", "done"}, {"ok", "in"}}, {{"h", "catch"}, {"bad", "in"}}};
        auto gp = std::make_shared<const TopologyGraph>(g);
        auto s = start_session(gp, Value::Array{1, 0, 2}, opts_with(), {});
        CHECK(s->run_to_completion(no_input) == Value("c"));
        CHECK(check_trace(s->export_trace()).ok);
        int pops = 0;
        for (const auto& e : s->trace()) pops += e.kind == TraceKind::FramePop;
        CHECK(pops == 2);
        CHECK(start_session(gp, Value::Array{1, 2}, {}, {})->run_to_completion(no_input) ==
              Value(Value::Array{10, 5}));
    }
}

TEST_CASE("summary modes") {
    auto fan = [](Value::Object cfg) {
        TopologyGraph g;
        g.name = "fan";
        g.entry = "start";
        Node c = make_node("c", NodeKind::Connector);
        c.out_ports.push_back("o2");
        g.nodes = {make_node("start", NodeKind::Start), c, make_node("a", NodeKind::Prompt, {{"template", "a{payload}"}}),
                   make_node("b", NodeKind::Code, {{"expr", "[payload, payload]"}}),
                   make_node("s", NodeKind::Summary, std::move(cfg)), make_node("end", NodeKind::End)};
        g.edges = {{{"start", "out"}, {"c", "in"}}, {{"c", "out"}, {"a", "in"}}, {{"c", "o2"}, {"b", "in"}},
                   {{"a", "out"}, {"s", "in"}},     {{"b", "out"}, {"s", "in"}}, {{"s", "out"}, {"end", "in"}}};
        return std::make_shared<const TopologyGraph>(g);
    };
    CHECK(start_session(fan({}), 1, {}, {})->run_to_completion(no_input) ==
          Value(Value::Array{"a1", Value::Array{1, 1}}));
    CHECK(start_session(fan({{"mode", "concat_text"}, {"separator", "|"}}), 1, {}, {})->run_to_completion(no_input) ==
          Value("a1|1|1"));
    CHECK(start_session(fan({{"mode", "template"}, {"template", "{len(inputs)}:{payload[0]}"}}), 1, {}, {})
              ->run_to_completion(no_input) == Value("2:a1"));
}

TEST_CASE("interaction nodes") {
    auto ask = chain({make_node("q", NodeKind::AskChoice,
                                {{"question", "Pick for {payload}"}, {"options", Value::Array{"a", "b"}}}),
                      make_node("show", NodeKind::ShowMessage, {{"text", "you chose {payload}"}})});
    auto s = start_session(ask, "me", opts_with(), {});
    StepOutcome o;
    do {
        o = s->step();
    } while (o.kind == OutcomeKind::Advanced);
    REQUIRE(o.kind == OutcomeKind::NeedsInput);
    CHECK(*o.value.find("question") == Value("Pick for me"));
    CHECK(*o.value.find("options") == Value(Value::Array{"a", "b"}));
    try {
        s->provide_input("c");
        FAIL("accepted invalid choice");
    } catch (const Error& e) {
        CHECK(e.code() == "InvalidChoice");
    }
    CHECK(s->status().kind == StatusKind::AwaitingInput);
    CHECK(s->provide_input("b").kind == OutcomeKind::Advanced);
    CHECK(s->run_to_completion(no_input) == Value("b"));
    bool displayed = false;
    for (const auto& e : s->trace()) {
        if (e.kind == TraceKind::Display) displayed = *e.data.find("text") == Value("you chose b");
    }
    CHECK(displayed);
    try {
        s->provide_input("a");
        FAIL("accepted input on finished session");
    } catch (const Error& e) {
        CHECK(e.code() == "IllegalState");
    }

    auto text = chain({make_node("q", NodeKind::AskText, {{"question", "ok?"}})});
    CHECK(start_session(text, nullptr, {}, {})->run_to_completion([](const Value& p) {
        CHECK(*p.find("widget") == Value("text"));
        return Value("yes");
    }) == Value("yes"));

    auto chart = chain({make_node("ch", NodeKind::ShowChart, {{"series", "payload"}})});
    CHECK(start_session(chart, Value::Array{1, 2}, {}, {})->run_to_completion(no_input) == Value(Value::Array{1, 2}));
    CHECK_THROWS_AS(start_session(chart, Value::Array{"x"}, {}, {})->run_to_completion(no_input), SessionFailed);
}

TEST_CASE("sub-agents") {
    TopologyGraph sub;
    sub.name = "helper";
    sub.entry = "s0";
    sub.nodes = {make_node("s0", NodeKind::Start), make_node("twice", NodeKind::Code, {{"expr", "payload * 2"}}),
                 make_node("s1", NodeKind::End)};
    sub.edges = {{{"s0", "out"}, {"twice", "in"}}, {{"twice", "out"}, {"s1", "in"}}};
    GraphLibrary lib;
    lib.add(std::make_shared<const TopologyGraph>(sub));
    std::map<std::string, std::shared_ptr<const TopologyGraph>> ref_lib{{"helper", lib.find("helper")}};
    Services svc;
    svc.library = &lib;
    auto g = chain({make_node("call", NodeKind::SubAgent, {{"graph", "helper"}}),
                    make_node("plus", NodeKind::Code, {{"expr", "payload + 1"}})});

    auto s = start_session(g, 20, opts_with({"call"}), svc);
    CHECK(s->step().kind == OutcomeKind::Paused);
    CHECK(s->current_node() == "call");
    CHECK(s->next_opens_frame());
    s->step();  // pushes the sub-agent frame
    CHECK(s->depth() == 2);
    CHECK(s->current_node() == "s0");
    CHECK(s->run_to_completion(no_input) == Value(41));
    CHECK(testsupport::reference_run(*g, 20, &ref_lib).value == Value(41));
    CHECK(check_trace(s->export_trace()).ok);

    auto missing = chain({make_node("call", NodeKind::SubAgent, {{"graph", "nope"}})});
    try {
        start_session(missing, 1, {}, svc)->run_to_completion(no_input);
        FAIL("ran a missing graph");
    } catch (const SessionFailed& e) {
        CHECK(e.record().kind == "UnknownGraph");
    }
}

TEST_CASE("llm nodes go through the gateway") {
    llm::Gateway gw(std::make_shared<llm::MockProvider>(7));
    Services svc;
    svc.gateway = &gw;
    auto g = chain({make_node("ask", NodeKind::LlmCall, {{"prompt", "write chapter {payload}"}})});
    auto s = start_session(g, 2, opts_with(), svc);
    Value out = s->run_to_completion(no_input);
    CHECK(out.as_string().starts_with("mock("));
    CHECK(s->usage().live_calls == 1);
    CHECK(s->usage().prompt_tokens == 3);

    SessionOptions o = opts_with();
    llm::MimicRule r;
    r.id = "ch";
    r.contains = "chapter";
    r.response = "canned text here";
    o.mimic_profile = {r};
    auto m = start_session(g, 2, o, svc);
    CHECK(m->run_to_completion(no_input) == Value("canned text here"));
    CHECK(m->usage().live_calls == 0);
    CHECK(m->usage().mimic_calls == 1);
    CHECK(m->usage().saved_tokens == 3 + 3);
    const TraceEvent* call = nullptr;
    for (const auto& e : m->trace()) {
        if (e.kind == TraceKind::LlmCall) call = &e;
    }
    REQUIRE(call);
    CHECK(*call->data.find("source") == Value("Mimic"));
    CHECK(*call->data.find("source_id") == Value("ch"));
}

TEST_CASE("tools call plugin components and failures route to catch") {
    plugins::PluginRegistry reg;
    reg.load_plugin(std::filesystem::path(AAD_SOURCE_DIR) / "plugins" / "simweb");
    Services svc;
    svc.plugins = &reg;
    auto g = [](const std::string& link) {
        TopologyGraph g;
        g.name = "web";
        g.entry = "start";
        g.nodes = {make_node("start", NodeKind::Start),
                   make_node("h", NodeKind::ErrorHandler),
                   make_node("open", NodeKind::Tool, {{"component", "simweb/open_page"}, {"args", Value::Object{{"url", "\"/index\""}}}}),
                   make_node("go", NodeKind::Tool, {{"component", "simweb/click"}, {"args", Value::Object{{"id", "\"" + link + "\""}}}}),
                   make_node("tab", NodeKind::Tool, {{"component", "simweb/extract_table"}, {"args", Value::Object{{"id", "\"prices\""}}}}),
                   make_node("ok", NodeKind::End, {{"result", "payload.rows"}}),
                   make_node("bad", NodeKind::End, {{"result", "payload.kind"}})};
        g.edges = {{{"start", "out"}, {"h", "in"}}, {{"h", "try"}, {"open", "in"}}, {{"open", "out"}, {"go", "in"}},
                   {{"go", "out"}, {"tab", "in"}},  {{"tab", "out"}, {"ok", "in"}},  {{"h", "catch"}, {"bad", "in"}}};
        return std::make_shared<const TopologyGraph>(g);
    };
    Value rows = start_session(g("nav_products"), nullptr, {}, svc)->run_to_completion(no_input);
    CHECK(rows.as_array().size() == 3);
    CHECK(start_session(g("nowhere"), nullptr, {}, svc)->run_to_completion(no_input) == Value("HandlerError"));
}

TEST_CASE("external code nodes") {
    auto g = chain({make_node("ext", NodeKind::Code,
                              {{"external", Value::Object{{"command", "python3 -c \"import json,sys; d=json.load(sys.stdin); "
                                                                      "print(json.dumps(d['payload']*3))\""},
                                                          {"timeout_ms", 10000}}}})});
    CHECK(start_session(g, 4, {}, {})->run_to_completion(no_input) == Value(12));
    auto slow = chain({make_node("ext", NodeKind::Code,
                                 {{"external", Value::Object{{"command", "sleep 5"}, {"timeout_ms", 100}}}})});
    try {
        start_session(slow, 4, {}, {})->run_to_completion(no_input);
        FAIL("timeout not enforced");
    } catch (const SessionFailed& e) {
        CHECK(e.record().kind == "ExternalFailed");
    }
    auto failing = chain({make_node("ext", NodeKind::Code, {{"external", Value::Object{{"command", "exit 4"}}}})});
    CHECK_THROWS_AS(start_session(failing, 4, {}, {})->run_to_completion(no_input), SessionFailed);
}

TEST_CASE("breakpoints pause before execution") {
    auto g = chain({make_node("a", NodeKind::Code, {{"expr", "payload + 1"}}),
                    make_node("b", NodeKind::Code, {{"expr", "payload * 10"}})});
    auto s = start_session(g, 1, opts_with({"b"}), {});
    StepOutcome o = s->step();
    while (o.kind == OutcomeKind::Advanced) o = s->step();
    REQUIRE(o.kind == OutcomeKind::Paused);
    CHECK(o.node == "b");
    CHECK(s->status().kind == StatusKind::PausedBreakpoint);
    for (const auto& e : s->trace()) CHECK_FALSE((e.kind == TraceKind::NodeEnter && e.node == std::optional<std::string>("b")));
    CHECK(s->trace().back().kind == TraceKind::BreakpointHit);
    CHECK(s->step().node == "b");
    CHECK(s->run_to_completion(no_input) == Value(20));

    auto entry = start_session(g, 1, opts_with({"start"}), {});
    CHECK(entry->step().kind == OutcomeKind::Paused);
    CHECK(entry->step().node == "start");
    try {
        entry->set_breakpoint("ghost");
        FAIL("accepted unknown breakpoint");
    } catch (const Error& e) {
        CHECK(e.code() == "UnknownNode");
    }
}

TEST_CASE("step count on loop-free graphs") {
    std::mt19937_64 rng(31);
    testsupport::GenOptions opts;
    opts.executable = true;
    int checked = 0;
    for (int i = 0; i < 600 && checked < 200; ++i) {
        TopologyGraph raw = testsupport::random_graph(rng, opts);
        bool loops = std::any_of(raw.nodes.begin(), raw.nodes.end(),
                                 [](const Node& n) { return n.type.kind == NodeKind::ArrayLoop; });
        if (loops) continue;
        auto g = std::make_shared<const TopologyGraph>(raw);
        auto expected = testsupport::reference_run(*g, 1);
        if (!expected.ok) continue;
        auto s = start_session(g, 1, {}, {});
        int advanced = 0;
        StepOutcome o;
        while ((o = s->step()).kind == OutcomeKind::Advanced) ++advanced;
        REQUIRE(o.kind == OutcomeKind::Done);
        CHECK(advanced + 1 == expected.executed);
        ++checked;
    }
    CHECK(checked >= 100);
}

TEST_CASE("determinism with the mock provider") {
    auto run = [] {
        llm::Gateway gw(std::make_shared<llm::MockProvider>(7));
        Services svc;
        svc.gateway = &gw;
        auto g = chain({make_node("ask", NodeKind::LlmCall, {{"prompt", "tell {payload}"}}),
                        make_node("ask2", NodeKind::LlmCall, {{"prompt", "again {payload}"}})});
        SessionOptions o;
        o.session_id = "fixed";
        auto s = start_session(g, "story", o, svc);
        s->run_to_completion(no_input);
        Value doc = s->export_trace();
        for (auto& e : doc.as_object()["events"].as_array()) e.as_object().erase("ts");
        return to_json(doc);
    };
    CHECK(run() == run());
}

TEST_CASE("session manager") {
    SessionManager mgr({}, 1);
    auto e = mgr.create(chain({}), 3, {});
    CHECK(mgr.ids().size() == 1);
    CHECK(mgr.get(e->session->id()) == e);
    CHECK(mgr.usage_totals(e->session->id()).live_calls == 0);
    try {
        mgr.get("nope");
        FAIL("found unknown session");
    } catch (const Error& err) {
        CHECK(err.code() == "UnknownSession");
    }
    SessionManager again({}, 1);
    CHECK(again.create(chain({}), 3, {})->session->id() == e->session->id());
}
