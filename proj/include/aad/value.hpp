#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aad/error.hpp"

namespace aad {

enum class EvalErrorKind { UnknownIdent, TypeMismatch, IndexOutOfRange, DivByZero, NonFinite };

std::string_view to_string(EvalErrorKind kind);

/// Raised by scriptlet evaluation and by Value construction (non-finite numbers).
class EvalError : public Error {
public:
    EvalError(EvalErrorKind kind, std::string path, const std::string& message);

    EvalErrorKind kind() const noexcept { return kind_; }
    const std::string& path() const noexcept { return path_; }

private:
    EvalErrorKind kind_;
    std::string path_;
};

/// JSON-like dynamic value carried along topology edges.
/// Numbers are finite doubles; -0 is normalized to 0.
class Value {
public:
    using Array = std::vector<Value>;
    using Object = std::map<std::string, Value, std::less<>>;

    enum class Type { Null, Bool, Number, String, Array, Object };

    Value() = default;
    Value(std::nullptr_t) {}
    Value(bool b) : data_(b) {}
    Value(double d);
    Value(int i) : Value(static_cast<double>(i)) {}
    Value(long i) : Value(static_cast<double>(i)) {}
    Value(long long i) : Value(static_cast<double>(i)) {}
    Value(unsigned long i) : Value(static_cast<double>(i)) {}
    Value(std::string s) : data_(std::move(s)) {}
    Value(std::string_view s) : data_(std::string(s)) {}
    Value(const char* s) : data_(std::string(s)) {}
    Value(Array a) : data_(std::move(a)) {}
    Value(Object o) : data_(std::move(o)) {}

    Type type() const noexcept { return static_cast<Type>(data_.index()); }
    bool is_null() const noexcept { return type() == Type::Null; }
    bool is_bool() const noexcept { return type() == Type::Bool; }
    bool is_number() const noexcept { return type() == Type::Number; }
    bool is_string() const noexcept { return type() == Type::String; }
    bool is_array() const noexcept { return type() == Type::Array; }
    bool is_object() const noexcept { return type() == Type::Object; }

    bool as_bool() const { return std::get<bool>(data_); }
    double as_number() const { return std::get<double>(data_); }
    const std::string& as_string() const { return std::get<std::string>(data_); }
    const Array& as_array() const { return std::get<Array>(data_); }
    Array& as_array() { return std::get<Array>(data_); }
    const Object& as_object() const { return std::get<Object>(data_); }
    Object& as_object() { return std::get<Object>(data_); }

    /// Object member lookup; returns nullptr when absent or not an object.
    const Value* find(std::string_view key) const;

    /// Deep structural equality.
    friend bool operator==(const Value& a, const Value& b) { return a.data_ == b.data_; }

private:
    std::variant<std::nullptr_t, bool, double, std::string, Array, Object> data_{nullptr};
};

std::string_view type_name(Value::Type t);

/// Shortest round-trip decimal rendering of a finite double.
std::string format_number(double d);

/// Canonical compact JSON: object keys in byte order, no whitespace,
/// shortest round-trip numbers.
std::string to_json(const Value& v);
void write_json(std::string& out, const Value& v);
void write_json_string(std::string& out, std::string_view s);

/// Parses any JSON text. Throws ParseError("SyntaxError") with line/column.
Value parse_json(std::string_view text);

/// Throws aad::Error("TypeMismatch") naming `what` when `v` is not of type `t`.
void expect_type(const Value& v, Value::Type t, std::string_view what);

}  // namespace aad
