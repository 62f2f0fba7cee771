#include "doctest.h"
#include "graph_gen.hpp"
#include "aad/scriptlet.hpp"

using namespace aad;
using namespace aad::scriptlet;

namespace {

EvalErrorKind eval_error(std::string_view src, const Value::Object& env = {}) {
    try {
        eval(src, env);
    } catch (const EvalError& e) {
        return e.kind();
    }
    FAIL("no EvalError for " << src);
    return EvalErrorKind::NonFinite;
}

// Random source text over the whole grammar, bounded depth.
std::string random_expr(std::mt19937_64& rng, int depth) {
    auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
    if (depth == 0 || pick(4) == 0) {
        static const char* atoms[] = {"null", "true", "false", "0", "1.5", "-3", "\"s\"", "\"\"", "x", "y", "arr",
                                      "obj", "[]", "{}", "zz", "\"a\\n\""};
        return atoms[pick(16)];
    }
    std::string a = random_expr(rng, depth - 1);
    std::string b = random_expr(rng, depth - 1);
    switch (pick(12)) {
        case 0: {
            static const char* ops[] = {"+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||"};
            return "(" + a + " " + ops[pick(13)] + " " + b + ")";
        }
        case 1: return std::string(pick(2) ? "-" : "!") + "(" + a + ")";
        case 2: return "(" + a + ")." + (pick(2) ? "k" : "len");
        case 3: return "(" + a + ")[" + b + "]";
        case 4: return "(" + a + " ? " + b + " : " + random_expr(rng, depth - 1) + ")";
        case 5: {
            static const char* fns1[] = {"len", "str", "num", "keys", "json", "parse_json"};
            return std::string(fns1[pick(6)]) + "(" + a + ")";
        }
        case 6: return "append(" + a + ", " + b + ")";
        case 7: return "contains(" + a + ", " + b + ")";
        case 8: return "slice(" + a + ", " + b + ", " + random_expr(rng, depth - 1) + ")";
        case 9: return "[" + a + ", " + b + "]";
        case 10: return "{\"k\": " + a + ", \"j\": " + b + "}";
        default: return a;
    }
}

}  // namespace

TEST_CASE("precedence, access and parse errors") {
    CHECK(eval("1+2*3", {}) == Value(7));
    CHECK(eval("a.b[0]", {{"a", Value::Object{{"b", Value::Array{5}}}}}) == Value(5));
    try {
        Scriptlet::parse("1 +");
        FAIL("parsed");
    } catch (const ScriptletParseError& e) {
        CHECK(e.line() == 1);
        CHECK(e.col() == 4);
    }
}

TEST_CASE("evaluation rules") {
    Value x = Value::Array{1, Value::Object{{"k", 2}}};
    CHECK(eval("x == x", {{"x", x}}) == Value(true));
    CHECK(eval(R"("a" + 1)", {}) == Value("a1"));
    CHECK(eval_error("10 % 0") == EvalErrorKind::DivByZero);
    CHECK(eval_error("nope") == EvalErrorKind::UnknownIdent);
    CHECK(eval_error("[1][3]") == EvalErrorKind::IndexOutOfRange);
    CHECK(eval_error("1 - \"a\"") == EvalErrorKind::TypeMismatch);
    CHECK(eval("false && nope", {}) == Value(false));
    CHECK(eval("true || nope", {}) == Value(true));
    CHECK(eval("\"abc\" < \"abd\"", {}) == Value(true));
    CHECK(eval("len(\"é😀\")", {}) == Value(2));
    CHECK(eval("slice([1,2,3,4], 1, 3)", {}) == Value(Value::Array{2, 3}));
    CHECK(eval("keys({\"b\": 1, \"a\": 2})", {}) == Value(Value::Array{"a", "b"}));
    CHECK(eval("contains(\"hello\", \"ell\")", {}) == Value(true));
    CHECK(eval("append([1], 2)", {}) == Value(Value::Array{1, 2}));
    CHECK(eval("num(\"2.5\") * 2", {}) == Value(5));
    CHECK(eval("json({\"a\": [1, null]})", {}) == Value(R"({"a":[1,null]})"));
    CHECK(eval("1 > 0 ? \"y\" : \"n\"", {}) == Value("y"));
}

TEST_CASE("templates") {
    CHECK(render("Hi {name}", {{"name", "Bob"}}) == "Hi Bob");
    CHECK(render("{{x}}", {}) == "{x}");
    CHECK(render("{a+b}!", {{"a", 2}, {"b", 3}}) == "5!");
    CHECK(render("[{n}]", {{"n", nullptr}}) == "[]");
    CHECK(render("{v}", {{"v", Value::Array{1, "a"}}}) == R"([1,"a"])");
    try {
        render("{1} {2 +}", {});
        FAIL("rendered");
    } catch (const TemplateError& e) {
        CHECK(e.index() == 1);
        CHECK(e.code() == "ParseError");
    }
    try {
        render("{a} {b}", {{"a", 1}});
        FAIL("rendered");
    } catch (const TemplateError& e) {
        CHECK(e.index() == 1);
        CHECK(e.code() == "UnknownIdent");
    }
}

TEST_CASE("totality and determinism over random expressions") {
    std::mt19937_64 rng(11);
    Value::Object env{{"x", 4}, {"y", "yy"}, {"arr", Value::Array{1, 2, 3}}, {"obj", Value::Object{{"k", 1}}}};
    int values = 0, errors = 0;
    for (int i = 0; i < 5000; ++i) {
        std::string src = random_expr(rng, 8);
        INFO(src);
        Scriptlet s = Scriptlet::parse(src);
        std::string first, second;
        for (std::string* out : {&first, &second}) {
            try {
                *out = to_json(s.eval(env));
                ++values;
            } catch (const EvalError& e) {
                *out = "error:" + std::string(to_string(e.kind()));
                ++errors;
            }
        }
        REQUIRE(first == second);
    }
    CHECK(values > 1000);
    CHECK(errors > 1000);
}

TEST_CASE("parse_json after json is identity") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        Value v = testsupport::random_value(rng, 3);
        Value::Object env{{"v", v}};
        REQUIRE(eval("parse_json(json(v))", env) == v);
        if (v.is_array() || v.is_object()) REQUIRE(eval("str(v)", env) == Value(to_json(v)));
    }
}
