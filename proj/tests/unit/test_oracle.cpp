#include <chrono>

#include "doctest.h"
#include "graph_gen.hpp"
#include "reference.hpp"
#include "aad/runtime.hpp"
#include "aad/trace_check.hpp"
#include "aad/topo_format.hpp"

using namespace aad;
using namespace aad::runtime;

namespace {

Value random_input(std::mt19937_64& rng) {
    switch (rng() % 5) {
        case 0: return Value::Array{1, 2, 3};
        case 1: return static_cast<long long>(rng() % 7);
        case 2: return "abc";
        case 3: return Value::Array{};
        default: return testsupport::random_value(rng, 2);
    }
}

}  // namespace

TEST_CASE("engine matches the reference interpreter on random graphs") {
    std::mt19937_64 rng(20240611);
    testsupport::GenOptions opts;
    opts.executable = true;
    opts.max_nodes = 40;
    int finished = 0, failed = 0, caught = 0, looped = 0, joined = 0;
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 2000; ++i) {
        auto g = std::make_shared<const TopologyGraph>(testsupport::random_graph(rng, opts));
        auto report = validate(*g);
        REQUIRE_MESSAGE(report.ok, serialize_unchecked(*g));
        Value input = random_input(rng);

        auto expected = testsupport::reference_run(*g, input);
        auto session = start_session(g, input, {}, {});
        Value got;
        std::string kind, node;
        try {
            got = session->run_to_completion([](const Value&) -> Value { return nullptr; });
        } catch (const SessionFailed& e) {
            kind = e.record().kind;
            node = e.record().node;
        }
        INFO("case " << i << " input " << to_json(input) << "\n" << serialize_unchecked(*g));
        REQUIRE(expected.ok == kind.empty());
        if (expected.ok) {
            CHECK(to_json(got) == to_json(expected.value));
            ++finished;
        } else {
            CHECK(kind == expected.error_kind);
            CHECK(node == expected.error_node);
            ++failed;
        }
        long long enters = 0;
        bool c = false, l = false, j = false;
        for (const auto& e : session->trace()) {
            enters += e.kind == TraceKind::NodeEnter;
            c = c || e.kind == TraceKind::ErrorCaught;
            l = l || e.kind == TraceKind::FramePush;
            if (e.kind == TraceKind::NodeEnter) {
                const Value* k = e.data.find("kind");
                j = j || (k && *k == Value("Summary"));
            }
        }
        auto wf = check_trace(session->export_trace());
        CHECK_MESSAGE(wf.ok, (wf.problems.empty() ? "" : wf.problems.front()));
        caught += c;
        looped += l;
        joined += j;
        CHECK_MESSAGE(enters == expected.executed, trace_to_text(session->export_trace()));
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("finished " << finished << ", failed " << failed << ", caught " << caught << ", looped " << looped
                        << ", joined " << joined << ", " << secs << " s");
    CHECK(caught > 150);
    CHECK(looped > 300);
    CHECK(joined > 400);
    CHECK(finished > 600);
    CHECK(failed > 100);
    CHECK(secs < 120.0);
}

TEST_CASE("reference interpreter on hand-built graphs") {
    auto chain = [](std::vector<Node> mids, std::vector<Edge> extra = {}) {
        TopologyGraph g;
        g.name = "t";
        g.entry = "start";
        g.nodes.push_back(make_node("start", NodeKind::Start));
        g.nodes.push_back(make_node("end", NodeKind::End));
        std::string prev = "start";
        for (auto& m : mids) {
            g.edges.push_back({{prev, "out"}, {m.id, "in"}});
            prev = m.id;
            g.nodes.push_back(std::move(m));
        }
        g.edges.push_back({{prev, "out"}, {"end", "in"}});
        for (auto& e : extra) g.edges.push_back(e);
        return g;
    };

    SUBCASE("prompt") {
        auto g = chain({make_node("p", NodeKind::Prompt, {{"template", "Hi {payload}"}})});
        auto r = testsupport::reference_run(g, "Bob");
        REQUIRE(r.ok);
        CHECK(r.value == Value("Hi Bob"));
    }
    SUBCASE("loop doubles items") {
        TopologyGraph g;
        g.name = "loop";
        g.entry = "start";
        g.nodes = {make_node("start", NodeKind::Start), make_node("L", NodeKind::ArrayLoop),
                   make_node("c", NodeKind::Code, {{"expr", "item * 2"}}), make_node("end", NodeKind::End)};
        g.edges = {{{"start", "out"}, {"L", "in"}},
                   {{"L", "body"}, {"c", "in"}},
                   {{"c", "out"}, {"L", "loopback"}},
                   {{"L", "done"}, {"end", "in"}}};
        REQUIRE(validate(g).ok);
        auto r = testsupport::reference_run(g, Value::Array{1, 2, 3});
        REQUIRE(r.ok);
        CHECK(r.value == Value(Value::Array{2, 4, 6}));
    }
    SUBCASE("division by zero is caught") {
        TopologyGraph g;
        g.name = "guard";
        g.entry = "start";
        g.nodes = {make_node("start", NodeKind::Start), make_node("h", NodeKind::ErrorHandler),
                   make_node("div", NodeKind::Code, {{"expr", "10 % 0"}}), make_node("ok", NodeKind::End),
                   make_node("msg", NodeKind::Prompt, {{"template", "err: {payload.kind}"}}),
                   make_node("bad", NodeKind::End)};
        g.edges = {{{"start", "out"}, {"h", "in"}},
                   {{"h", "try"}, {"div", "in"}},
                   {{"div", "out"}, {"ok", "in"}},
                   {{"h", "catch"}, {"msg", "in"}},
                   {{"msg", "out"}, {"bad", "in"}}};
        REQUIRE(validate(g).ok);
        auto r = testsupport::reference_run(g, 1);
        REQUIRE(r.ok);
        CHECK(r.value == Value("err: DivByZero"));
    }
}
