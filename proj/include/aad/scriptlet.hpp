#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "aad/value.hpp"

// The sandboxed expression language used by Code nodes, Branch conditions,
// prompt templates and Summary templates. The grammar is documented in
// docs/scriptlet.ebnf. There are no loops, assignments or host calls, so every
// evaluation terminates.
namespace aad::scriptlet {

struct Expr;

class ScriptletParseError : public ParseError {
public:
    ScriptletParseError(const std::string& message, int line, int col, std::string expected)
        : ParseError("ParseError", message, line, col), expected_(std::move(expected)) {}

    const std::string& expected() const noexcept { return expected_; }

private:
    std::string expected_;
};

class Scriptlet {
public:
    /// Throws ScriptletParseError.
    static Scriptlet parse(std::string_view source);

    /// Pure evaluation; `env` is never modified. Throws EvalError.
    Value eval(const Value::Object& env) const;

    const std::string& source() const noexcept { return source_; }

private:
    std::shared_ptr<const Expr> root_;
    std::string source_;
};

/// Error raised while rendering a template; keeps the code of the underlying
/// ParseError/EvalError and the 0-based index of the failing interpolation.
class TemplateError : public Error {
public:
    TemplateError(const Error& inner, std::size_t index);

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Text with `{expr}` interpolations; `{{` and `}}` stand for literal braces.
class Template {
public:
    static Template parse(std::string_view text);

    std::string render(const Value::Object& env) const;

private:
    struct Piece {
        std::string literal;
        std::shared_ptr<Scriptlet> expr;
    };
    std::vector<Piece> pieces_;
};

/// The `str()` conversion: strings verbatim, null as "", numbers in shortest
/// form, arrays and objects as canonical JSON.
std::string to_display_string(const Value& v);

Value eval(std::string_view source, const Value::Object& env);
std::string render(std::string_view text, const Value::Object& env);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

}  // namespace aad::scriptlet
