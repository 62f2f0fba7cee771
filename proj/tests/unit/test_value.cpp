#include <cmath>
#include <limits>

#include "doctest.h"
#include "graph_gen.hpp"
#include "aad/value.hpp"

using namespace aad;

TEST_CASE("numbers are finite and normalized") {
    CHECK_THROWS_AS(Value(std::numeric_limits<double>::quiet_NaN()), EvalError);
    CHECK_THROWS_AS(Value(std::numeric_limits<double>::infinity()), EvalError);
    CHECK(to_json(Value(-0.0)) == "0");
    CHECK(format_number(0.1 + 0.2) == "0.30000000000000004");
    CHECK(format_number(1e21) == "1e+21");
    CHECK(format_number(5) == "5");
    CHECK(format_number(-2.5) == "-2.5");
}

TEST_CASE("canonical json sorts keys and escapes") {
    Value v = Value::Object{{"b", 1}, {"a", Value::Array{true, nullptr, "x\n\"y\""}}};
    CHECK(to_json(v) == R"({"a":[true,null,"x\n\"y\""],"b":1})");
    CHECK(to_json(Value("\x01")) == R"("\u0001")");
    CHECK(to_json(Value("é😀")) == "\"é😀\"");
}

TEST_CASE("parse_json reports positions") {
    try {
        parse_json("{\n  \"a\": [1,\n  ]\n}");
        FAIL("accepted trailing comma");
    } catch (const ParseError& e) {
        CHECK(e.code() == "SyntaxError");
        CHECK(e.line() == 3);
    }
    CHECK(parse_json(" [1, 2.5e3, \"\\u00e9\"] ") == Value(Value::Array{1, 2500, "é"}));
    CHECK(parse_json("\"\\ud83d\\ude00\"") == Value("😀"));
}

TEST_CASE("json round trip on random values") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 2000; ++i) {
        Value v = testsupport::random_value(rng, 4);
        std::string text = to_json(v);
        Value back = parse_json(text);
        REQUIRE(back == v);
        REQUIRE(to_json(back) == text);
    }
}
