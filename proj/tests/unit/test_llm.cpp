#include <filesystem>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "aad/hashing.hpp"
#include "aad/llm.hpp"
#include "aad/topo_format.hpp"

using namespace aad;
using namespace aad::llm;

namespace {

Request make_request(std::string user, std::string node = "n1", long long call = 0) {
    Request r;
    r.model = "gpt-test";
    r.messages = {{"system", "Be brief."}, {"user", std::move(user)}};
    r.params.temperature = 0.5;
    r.params.max_tokens = 64;
    r.origin = {"s1", std::move(node), call};
    return r;
}

// Canned chat-completions endpoint.
class FakeTransport : public Transport {
public:
    HttpReply post(const std::string& url, const std::vector<std::pair<std::string, std::string>>& headers,
                   const std::string& body, int) override {
        last_url = url;
        last_headers = headers;
        last_body = body;
        return reply;
    }
    HttpReply reply{200, R"({"choices":[{"message":{"role":"assistant","content":"live answer"}}],)"
                         R"("usage":{"prompt_tokens":11,"completion_tokens":2}})"};
    std::string last_url, last_body;
    std::vector<std::pair<std::string, std::string>> last_headers;
};

std::string error_code(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "none";
}

}  // namespace

TEST_CASE("whitespace tokenizer") {
    CHECK(count_tokens("a b c d") == 4);
    CHECK(count_tokens("  lead\ttab\nnew  ") == 3);
    CHECK(count_tokens("") == 0);
    CHECK(count_tokens("x y　z") == 3);
    CHECK(whitespace_tokens("é😀 two") == std::vector<std::string>{"é😀", "two"});
}

TEST_CASE("fingerprint golden value") {
    // sha256 of {"messages":[...],"model":"gpt-test","params":{"max_tokens":64,"temperature":0.5}}
    Request r = make_request("write chapter 2 · héllo");
    CHECK(fingerprint(r) == "68260d5ce04c19a522fd32756667a0e52ffa8283d10cafe030e2ee2e7ebfe0a8");
    Request seeded = r;
    seeded.params.seed = 9;
    seeded.origin.call_index = 5;
    CHECK(fingerprint(seeded) == fingerprint(r));
    Request other = r;
    other.params.max_tokens = 65;
    CHECK(fingerprint(other) != fingerprint(r));
}

TEST_CASE("hash primitives") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(base64_encode("hello") == "aGVsbG8=");
    auto d = sha1_digest("dGhlIHNhbXBsZSBub25jZQ==258EAFA5-E914-47DA-95CA-C5AB0DC85B11");
    CHECK(base64_encode(std::string(d.begin(), d.end())) == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
    CHECK(hex64(fnv1a64("")) == "cbf29ce484222325");
}

TEST_CASE("mock provider") {
    MockProvider a(42), b(43);
    Request r = make_request("write chapter 2 · héllo");
    Response x = a.complete(r), y = a.complete(r);
    CHECK(x.content == y.content);
    CHECK(x.content == "mock(cbc56669d70e8cf6) write chapter 2 · héllo");
    CHECK(b.complete(r).content != x.content);
    CHECK(x.usage.prompt_tokens == count_tokens("Be brief.") + count_tokens("write chapter 2 · héllo"));
    CHECK(x.usage.completion_tokens == count_tokens(x.content));
    CHECK(x.source.kind == SourceKind::Mock);
    Request longer = make_request("one two three four five six seven eight nine ten");
    CHECK(a.complete(longer).content.ends_with(" three four five six seven eight nine ten"));
}

TEST_CASE("mimic rules") {
    MimicRule rule;
    rule.id = "r1";
    rule.contains = "chapter";
    rule.response = "a b c d";
    CHECK(rule.matches(make_request("write chapter 2")));
    CHECK_FALSE(rule.matches(make_request("write verse 2")));
    rule.node_pattern = "para*";
    CHECK_FALSE(rule.matches(make_request("write chapter 2", "outline")));
    CHECK(rule.matches(make_request("write chapter 2", "para_3")));
    rule.call_index = std::pair<long long, long long>{2, 4};
    CHECK_FALSE(rule.matches(make_request("write chapter 2", "para_3", 1)));
    CHECK(rule.matches(make_request("write chapter 2", "para_3", 4)));

    MimicRule back = rule_from_value(rule_to_value(rule));
    CHECK(to_json(rule_to_value(back)) == to_json(rule_to_value(rule)));
    CHECK(rule_from_value(parse_json(R"({"id":"x","response":"r","match":{"call_index":3}})")).call_index ==
          std::pair<long long, long long>{3, 3});
    CHECK(error_code([] { rule_from_value(parse_json(R"({"response":"r"})")); }) == "InvalidRule");
}

TEST_CASE("gateway modes and hermeticity") {
    FakeTransport fake;
    CountingTransport counting(fake);
    auto provider = std::make_shared<HttpProvider>("http://llm.invalid/v1", "k", counting);
    Gateway gw(provider);

    MimicRule rule;
    rule.id = "chap";
    rule.contains = "chapter";
    rule.response = "a b c d";
    gw.add_rule(rule);

    SUBCASE("mimic answers without traffic") {
        Response r = gw.complete(make_request("write chapter 2"), Mode::MimicFirst);
        CHECK(r.source.kind == SourceKind::Mimic);
        CHECK(r.source.id == "chap");
        CHECK(r.content == "a b c d");
        CHECK(r.usage.completion_tokens == 4);
        CHECK(counting.requests() == 0);
        CHECK(counting.bytes_sent() == 0);
    }
    SUBCASE("disabled rules and declaration order") {
        MimicRule off = rule;
        off.id = "chap";
        off.enabled = false;
        gw.add_rule(off);
        MimicRule second;
        second.id = "any";
        second.response = "fallback";
        gw.add_rule(second);
        CHECK(gw.complete(make_request("write chapter 2"), Mode::MimicFirst).source.id == "any");
        CHECK(counting.requests() == 0);
    }
    SUBCASE("live call shape") {
        Response r = gw.complete(make_request("hello"), Mode::Live);
        CHECK(r.source.kind == SourceKind::Live);
        CHECK(r.content == "live answer");
        CHECK(r.usage.prompt_tokens == 11);
        CHECK(fake.last_url == "http://llm.invalid/v1/chat/completions");
        Value body = parse_json(fake.last_body);
        CHECK(body.find("model")->as_string() == "gpt-test");
        CHECK(body.find("messages")->as_array().size() == 2);
        CHECK(body.find("max_tokens")->as_number() == 64);
        bool auth = false;
        for (const auto& [k, v] : fake.last_headers) auth = auth || (k == "Authorization" && v == "Bearer k");
        CHECK(auth);
        CHECK(counting.requests() == 1);
    }
    SUBCASE("record then replay") {
        Request req = make_request("hello");
        Response live = gw.complete(req, Mode::Record);
        CHECK(counting.requests() == 1);
        Response again = gw.complete(req, Mode::Replay);
        CHECK(again.content == live.content);
        CHECK(again.source.kind == SourceKind::Replay);
        CHECK(again.usage.completion_tokens == count_tokens(live.content));
        CHECK(counting.requests() == 1);
        std::size_t size = gw.records().size();
        CHECK(error_code([&] { gw.complete(make_request("other"), Mode::Replay); }) == "ReplayMiss");
        CHECK(gw.records().size() == size);
        CHECK(gw.complete(req, Mode::MimicFirst).source.kind == SourceKind::Replay);
        CHECK(counting.requests() == 1);
    }
    SUBCASE("provider errors") {
        fake.reply = {503, "overloaded"};
        CHECK(error_code([&] { gw.complete(make_request("hello"), Mode::Live); }) == "ProviderError");
    }
}

TEST_CASE("record store persistence") {
    auto dir = std::filesystem::temp_directory_path() / ("aad_llm_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    auto file = dir / "records.ndjson";
    std::filesystem::remove(file);
    Gateway gw(std::make_shared<MockProvider>(1));
    gw.records().bind_file(file);
    Request a = make_request("one"), b = make_request("two");
    gw.complete(a, Mode::Record);
    gw.complete(b, Mode::Record);

    Gateway fresh(std::make_shared<MockProvider>(2));
    fresh.records().load(file);
    CHECK(fresh.records().size() == 2);
    CHECK(fresh.complete(a, Mode::Replay).content == gw.complete(a, Mode::Replay).content);
    std::string text = read_text_file(file);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    std::filesystem::remove_all(dir);
}

TEST_CASE("usage totals") {
    UsageTotals t;
    CHECK(to_json(t.to_value()) ==
          R"({"completion_tokens":0,"live_calls":0,"mimic_calls":0,"prompt_tokens":0,"saved_tokens":0})");
    Gateway gw(std::make_shared<MockProvider>(0));
    MimicRule all;
    all.id = "all";
    all.response = "x y";
    for (int i = 0; i < 10; ++i) {
        Request r = make_request("q" + std::to_string(i));
        t.add(gw.complete(r, Mode::MimicFirst, {all}), r);
    }
    CHECK(t.live_calls == 0);
    CHECK(t.mimic_calls == 10);
    CHECK(t.saved_tokens == 10 * (3 + 2));
    long long before = t.saved_tokens;
    Request r = make_request("live one");
    t.add(gw.complete(r, Mode::Live), r);
    CHECK(t.live_calls == 1);
    CHECK(t.saved_tokens == before);
    CHECK(UsageTotals::from_value(t.to_value()).to_value() == t.to_value());
}

TEST_CASE("httplib transport talks to a local server") {
    httplib::Server srv;
    std::string seen;
    srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = req.body;
        res.set_content(R"({"choices":[{"message":{"content":"pong"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}})",
                        "application/json");
    });
    int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    HttplibTransport transport;
    HttpProvider provider("http://127.0.0.1:" + std::to_string(port) + "/v1", "", transport, 5000);
    Response r = provider.complete(make_request("ping"));
    srv.stop();
    t.join();
    CHECK(r.content == "pong");
    CHECK(r.usage.prompt_tokens == 3);
    CHECK(parse_json(seen).find("temperature")->as_number() == 0.5);
}
