#include "aad/value.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

namespace aad {

std::string_view to_string(EvalErrorKind kind) {
    switch (kind) {
        case EvalErrorKind::UnknownIdent: return "UnknownIdent";
        case EvalErrorKind::TypeMismatch: return "TypeMismatch";
        case EvalErrorKind::IndexOutOfRange: return "IndexOutOfRange";
        case EvalErrorKind::DivByZero: return "DivByZero";
        case EvalErrorKind::NonFinite: return "NonFinite";
    }
    return "Unknown";
}

EvalError::EvalError(EvalErrorKind kind, std::string path, const std::string& message)
    : Error(std::string(to_string(kind)), message), kind_(kind), path_(std::move(path)) {}

Value::Value(double d) {
    if (!std::isfinite(d)) {
        throw EvalError(EvalErrorKind::NonFinite, "", "non-finite number");
    }
    data_ = d == 0.0 ? 0.0 : d;
}

const Value* Value::find(std::string_view key) const {
    if (!is_object()) return nullptr;
    const auto& obj = as_object();
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &it->second;
}

std::string_view type_name(Value::Type t) {
    switch (t) {
        case Value::Type::Null: return "null";
        case Value::Type::Bool: return "bool";
        case Value::Type::Number: return "number";
        case Value::Type::String: return "string";
        case Value::Type::Array: return "array";
        case Value::Type::Object: return "object";
    }
    return "?";
}

std::string format_number(double d) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, res.ptr);
}

void write_json_string(std::string& out, std::string_view s) {
    static constexpr char hex[] = "0123456789abcdef";
    out.push_back('"');
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    out += "\\u00";
                    out.push_back(hex[c >> 4]);
                    out.push_back(hex[c & 0xf]);
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    out.push_back('"');
}

void write_json(std::string& out, const Value& v) {
    switch (v.type()) {
        case Value::Type::Null: out += "null"; break;
        case Value::Type::Bool: out += v.as_bool() ? "true" : "false"; break;
        case Value::Type::Number: out += format_number(v.as_number()); break;
        case Value::Type::String: write_json_string(out, v.as_string()); break;
        case Value::Type::Array: {
            out.push_back('[');
            bool first = true;
            for (const auto& e : v.as_array()) {
                if (!first) out.push_back(',');
                first = false;
                write_json(out, e);
            }
            out.push_back(']');
            break;
        }
        case Value::Type::Object: {
            out.push_back('{');
            bool first = true;
            for (const auto& [k, e] : v.as_object()) {
                if (!first) out.push_back(',');
                first = false;
                write_json_string(out, k);
                out.push_back(':');
                write_json(out, e);
            }
            out.push_back('}');
            break;
        }
    }
}

std::string to_json(const Value& v) {
    std::string out;
    write_json(out, v);
    return out;
}

namespace {

Value from_nlohmann(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::null: return Value();
        case nlohmann::json::value_t::boolean: return Value(j.get<bool>());
        case nlohmann::json::value_t::number_integer: return Value(static_cast<double>(j.get<std::int64_t>()));
        case nlohmann::json::value_t::number_unsigned: return Value(static_cast<double>(j.get<std::uint64_t>()));
        case nlohmann::json::value_t::number_float: return Value(j.get<double>());
        case nlohmann::json::value_t::string: return Value(j.get<std::string>());
        case nlohmann::json::value_t::array: {
            Value::Array arr;
            arr.reserve(j.size());
            for (const auto& e : j) arr.push_back(from_nlohmann(e));
            return Value(std::move(arr));
        }
        case nlohmann::json::value_t::object: {
            Value::Object obj;
            for (auto it = j.begin(); it != j.end(); ++it) obj.emplace(it.key(), from_nlohmann(it.value()));
            return Value(std::move(obj));
        }
        default: break;
    }
    throw Error("SyntaxError", "unsupported JSON value");
}

std::pair<int, int> line_col(std::string_view text, std::size_t byte_pos) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte_pos && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace

Value parse_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        // nlohmann reports the 1-based byte index of the offending character.
        std::size_t pos = e.byte > 0 ? e.byte - 1 : 0;
        auto [line, col] = line_col(text, pos);
        throw ParseError("SyntaxError",
                         "malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col),
                         line, col);
    }
    try {
        return from_nlohmann(j);
    } catch (const EvalError&) {
        throw ParseError("SyntaxError", "non-finite number in JSON", 1, 1);
    }
}

void expect_type(const Value& v, Value::Type t, std::string_view what) {
    if (v.type() != t) {
        throw Error("TypeMismatch", std::string(what) + ": expected " + std::string(type_name(t)) + ", got " +
                                        std::string(type_name(v.type())));
    }
}

}  // namespace aad
