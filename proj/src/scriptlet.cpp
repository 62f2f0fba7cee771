#include "aad/scriptlet.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace aad::scriptlet {

namespace {

constexpr int kMaxDepth = 200;
constexpr std::size_t kMaxTokens = 20000;

enum class Tok {
    End,
    Number,
    String,
    Ident,
    Null,
    True,
    False,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Bang,
    Less,
    LessEq,
    Greater,
    GreaterEq,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
    Question,
    Colon,
    Dot,
    Comma,
    LBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;  // identifier name or decoded string literal
    double number = 0;
    std::size_t offset = 0;
    std::size_t length = 0;
};

}  // namespace

enum class Builtin { Len, Str, Num, Keys, Append, Slice, Contains, Json, ParseJson };

namespace {

struct BuiltinInfo {
    std::string_view name;
    Builtin fn;
    std::size_t arity;
};

constexpr std::array<BuiltinInfo, 9> kBuiltins{{
    {"len", Builtin::Len, 1},
    {"str", Builtin::Str, 1},
    {"num", Builtin::Num, 1},
    {"keys", Builtin::Keys, 1},
    {"append", Builtin::Append, 2},
    {"slice", Builtin::Slice, 3},
    {"contains", Builtin::Contains, 2},
    {"json", Builtin::Json, 1},
    {"parse_json", Builtin::ParseJson, 1},
}};

}  // namespace

enum class Op {
    Literal,
    Ident,
    ArrayLit,
    ObjectLit,
    Neg,
    Not,
    Mul,
    Div,
    Mod,
    Add,
    Sub,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Cond,
    Member,
    Index,
    Call,
};

struct Expr {
    Op op = Op::Literal;
    Value literal;
    std::string name;               // identifier, member name or object keys joined
    std::vector<std::string> keys;  // object literal keys
    Builtin fn = Builtin::Len;
    std::vector<std::unique_ptr<Expr>> kids;
    std::size_t begin = 0;
    std::size_t end = 0;
};

namespace {

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.offset = pos_;
            if (pos_ >= src_.size()) {
                t.kind = Tok::End;
                out.push_back(t);
                return out;
            }
            char c = src_[pos_];
            if (is_digit(c)) {
                lex_number(t);
            } else if (c == '"') {
                lex_string(t);
            } else if (is_ident_start(c)) {
                std::size_t s = pos_;
                while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
                t.text = std::string(src_.substr(s, pos_ - s));
                if (t.text == "null") {
                    t.kind = Tok::Null;
                } else if (t.text == "true") {
                    t.kind = Tok::True;
                } else if (t.text == "false") {
                    t.kind = Tok::False;
                } else {
                    t.kind = Tok::Ident;
                }
            } else {
                lex_punct(t);
            }
            t.length = pos_ - t.offset;
            out.push_back(std::move(t));
        }
    }

    [[noreturn]] void fail(std::size_t offset, const std::string& msg, const std::string& expected) const {
        int line = 1, col = 1;
        for (std::size_t i = 0; i < offset && i < src_.size(); ++i) {
            if (src_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ScriptletParseError(msg + " at line " + std::to_string(line) + ", column " + std::to_string(col),
                                  line, col, expected);
    }

private:
    static bool is_digit(char c) { return c >= '0' && c <= '9'; }
    static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
    static bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                                      src_[pos_] == '\r')) {
            ++pos_;
        }
    }

    void lex_number(Token& t) {
        std::size_t s = pos_;
        while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            if (pos_ >= src_.size() || !is_digit(src_[pos_])) fail(pos_, "malformed number", "digit");
            while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ >= src_.size() || !is_digit(src_[pos_])) fail(pos_, "malformed exponent", "digit");
            while (pos_ < src_.size() && is_digit(src_[pos_])) ++pos_;
        }
        double d = 0;
        auto res = std::from_chars(src_.data() + s, src_.data() + pos_, d);
        if (res.ec != std::errc() || !std::isfinite(d)) fail(s, "number out of range", "finite number");
        t.kind = Tok::Number;
        t.number = d;
    }

    void lex_string(Token& t) {
        ++pos_;
        std::string out;
        for (;;) {
            if (pos_ >= src_.size()) fail(pos_, "unterminated string", "'\"'");
            char c = src_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (pos_ >= src_.size()) fail(pos_, "unterminated escape", "escape character");
            char e = src_[pos_++];
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                default: fail(pos_ - 2, "unknown escape", "one of \\n \\t \\\" \\\\");
            }
        }
        t.kind = Tok::String;
        t.text = std::move(out);
    }

    void lex_punct(Token& t) {
        auto two = [&](char next) { return pos_ + 1 < src_.size() && src_[pos_ + 1] == next; };
        char c = src_[pos_];
        std::size_t len = 1;
        switch (c) {
            case '+': t.kind = Tok::Plus; break;
            case '-': t.kind = Tok::Minus; break;
            case '*': t.kind = Tok::Star; break;
            case '/': t.kind = Tok::Slash; break;
            case '%': t.kind = Tok::Percent; break;
            case '?': t.kind = Tok::Question; break;
            case ':': t.kind = Tok::Colon; break;
            case '.': t.kind = Tok::Dot; break;
            case ',': t.kind = Tok::Comma; break;
            case '[': t.kind = Tok::LBracket; break;
            case ']': t.kind = Tok::RBracket; break;
            case '(': t.kind = Tok::LParen; break;
            case ')': t.kind = Tok::RParen; break;
            case '{': t.kind = Tok::LBrace; break;
            case '}': t.kind = Tok::RBrace; break;
            case '!':
                if (two('=')) {
                    t.kind = Tok::NotEq;
                    len = 2;
                } else {
                    t.kind = Tok::Bang;
                }
                break;
            case '<':
                if (two('=')) {
                    t.kind = Tok::LessEq;
                    len = 2;
                } else {
                    t.kind = Tok::Less;
                }
                break;
            case '>':
                if (two('=')) {
                    t.kind = Tok::GreaterEq;
                    len = 2;
                } else {
                    t.kind = Tok::Greater;
                }
                break;
            case '=':
                if (!two('=')) fail(pos_, "unexpected '='", "'=='");
                t.kind = Tok::EqEq;
                len = 2;
                break;
            case '&':
                if (!two('&')) fail(pos_, "unexpected '&'", "'&&'");
                t.kind = Tok::AndAnd;
                len = 2;
                break;
            case '|':
                if (!two('|')) fail(pos_, "unexpected '|'", "'||'");
                t.kind = Tok::OrOr;
                len = 2;
                break;
            default: fail(pos_, std::string("unexpected character '") + c + "'", "expression");
        }
        pos_ += len;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

using ExprPtr = std::unique_ptr<Expr>;

class Parser {
public:
    Parser(std::string_view src, std::vector<Token> toks) : lexer_(src), toks_(std::move(toks)) {}

    ExprPtr parse_all() {
        auto e = conditional();
        if (peek().kind != Tok::End) fail_here("unexpected token", "end of input");
        return e;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    const Token& prev() const { return toks_[pos_ - 1]; }
    bool accept(Tok k) {
        if (peek().kind != k) return false;
        ++pos_;
        return true;
    }
    void expect(Tok k, const std::string& what) {
        if (!accept(k)) fail_here("expected " + what, what);
    }
    [[noreturn]] void fail_here(const std::string& msg, const std::string& expected) const {
        lexer_.fail(peek().offset, peek().kind == Tok::End ? "unexpected end of input" : msg, expected);
    }

    ExprPtr make(Op op, std::size_t begin) {
        auto e = std::make_unique<Expr>();
        e->op = op;
        e->begin = begin;
        e->end = prev().offset + prev().length;
        return e;
    }

    ExprPtr binary(Op op, ExprPtr lhs, ExprPtr rhs) {
        auto e = std::make_unique<Expr>();
        e->op = op;
        e->begin = lhs->begin;
        e->end = rhs->end;
        e->kids.push_back(std::move(lhs));
        e->kids.push_back(std::move(rhs));
        return e;
    }

    struct DepthGuard {
        Parser& p;
        explicit DepthGuard(Parser& parser) : p(parser) {
            if (++p.depth_ > kMaxDepth) p.fail_here("expression nested too deeply", "shallower expression");
        }
        ~DepthGuard() { --p.depth_; }
    };

    ExprPtr conditional() {
        DepthGuard guard(*this);
        auto cond = logical_or();
        if (!accept(Tok::Question)) return cond;
        auto yes = conditional();
        expect(Tok::Colon, "':'");
        auto no = conditional();
        auto e = std::make_unique<Expr>();
        e->op = Op::Cond;
        e->begin = cond->begin;
        e->end = no->end;
        e->kids.push_back(std::move(cond));
        e->kids.push_back(std::move(yes));
        e->kids.push_back(std::move(no));
        return e;
    }

    ExprPtr logical_or() {
        auto lhs = logical_and();
        while (accept(Tok::OrOr)) lhs = binary(Op::Or, std::move(lhs), logical_and());
        return lhs;
    }

    ExprPtr logical_and() {
        auto lhs = equality();
        while (accept(Tok::AndAnd)) lhs = binary(Op::And, std::move(lhs), equality());
        return lhs;
    }

    ExprPtr equality() {
        auto lhs = comparison();
        for (;;) {
            if (accept(Tok::EqEq)) {
                lhs = binary(Op::Eq, std::move(lhs), comparison());
            } else if (accept(Tok::NotEq)) {
                lhs = binary(Op::Ne, std::move(lhs), comparison());
            } else {
                return lhs;
            }
        }
    }

    ExprPtr comparison() {
        auto lhs = additive();
        for (;;) {
            Op op;
            if (accept(Tok::Less)) {
                op = Op::Lt;
            } else if (accept(Tok::LessEq)) {
                op = Op::Le;
            } else if (accept(Tok::Greater)) {
                op = Op::Gt;
            } else if (accept(Tok::GreaterEq)) {
                op = Op::Ge;
            } else {
                return lhs;
            }
            lhs = binary(op, std::move(lhs), additive());
        }
    }

    ExprPtr additive() {
        auto lhs = multiplicative();
        for (;;) {
            if (accept(Tok::Plus)) {
                lhs = binary(Op::Add, std::move(lhs), multiplicative());
            } else if (accept(Tok::Minus)) {
                lhs = binary(Op::Sub, std::move(lhs), multiplicative());
            } else {
                return lhs;
            }
        }
    }

    ExprPtr multiplicative() {
        auto lhs = unary();
        for (;;) {
            if (accept(Tok::Star)) {
                lhs = binary(Op::Mul, std::move(lhs), unary());
            } else if (accept(Tok::Slash)) {
                lhs = binary(Op::Div, std::move(lhs), unary());
            } else if (accept(Tok::Percent)) {
                lhs = binary(Op::Mod, std::move(lhs), unary());
            } else {
                return lhs;
            }
        }
    }

    ExprPtr unary() {
        DepthGuard guard(*this);
        std::size_t begin = peek().offset;
        if (accept(Tok::Minus)) {
            auto operand = unary();
            auto e = make(Op::Neg, begin);
            e->kids.push_back(std::move(operand));
            return e;
        }
        if (accept(Tok::Bang)) {
            auto operand = unary();
            auto e = make(Op::Not, begin);
            e->kids.push_back(std::move(operand));
            return e;
        }
        return postfix();
    }

    ExprPtr postfix() {
        auto e = primary();
        for (;;) {
            if (accept(Tok::Dot)) {
                if (peek().kind != Tok::Ident && peek().kind != Tok::Null && peek().kind != Tok::True &&
                    peek().kind != Tok::False) {
                    fail_here("expected member name", "identifier");
                }
                std::string name = peek().text;
                ++pos_;
                auto m = make(Op::Member, e->begin);
                m->name = std::move(name);
                m->kids.push_back(std::move(e));
                e = std::move(m);
            } else if (accept(Tok::LBracket)) {
                auto idx = conditional();
                expect(Tok::RBracket, "']'");
                auto m = make(Op::Index, e->begin);
                m->kids.push_back(std::move(e));
                m->kids.push_back(std::move(idx));
                e = std::move(m);
            } else {
                return e;
            }
        }
    }

    ExprPtr primary() {
        const Token& t = peek();
        std::size_t begin = t.offset;
        switch (t.kind) {
            case Tok::Number: {
                ++pos_;
                auto e = make(Op::Literal, begin);
                e->literal = Value(prev().number);
                return e;
            }
            case Tok::String: {
                ++pos_;
                auto e = make(Op::Literal, begin);
                e->literal = Value(prev().text);
                return e;
            }
            case Tok::Null: ++pos_; return make(Op::Literal, begin);
            case Tok::True:
            case Tok::False: {
                ++pos_;
                auto e = make(Op::Literal, begin);
                e->literal = Value(prev().kind == Tok::True);
                return e;
            }
            case Tok::Ident: {
                ++pos_;
                std::string name = prev().text;
                if (!accept(Tok::LParen)) {
                    auto e = make(Op::Ident, begin);
                    e->name = std::move(name);
                    return e;
                }
                auto info = std::find_if(kBuiltins.begin(), kBuiltins.end(),
                                         [&](const BuiltinInfo& b) { return b.name == name; });
                if (info == kBuiltins.end()) lexer_.fail(begin, "unknown function '" + name + "'", "built-in function");
                std::vector<ExprPtr> args;
                if (!accept(Tok::RParen)) {
                    do {
                        args.push_back(conditional());
                    } while (accept(Tok::Comma));
                    expect(Tok::RParen, "')'");
                }
                if (args.size() != info->arity) {
                    lexer_.fail(begin, name + "() takes " + std::to_string(info->arity) + " argument(s)",
                                std::to_string(info->arity) + " argument(s)");
                }
                auto e = make(Op::Call, begin);
                e->name = std::move(name);
                e->fn = info->fn;
                e->kids = std::move(args);
                return e;
            }
            case Tok::LParen: {
                ++pos_;
                auto inner = conditional();
                expect(Tok::RParen, "')'");
                return inner;
            }
            case Tok::LBracket: {
                ++pos_;
                std::vector<ExprPtr> items;
                if (!accept(Tok::RBracket)) {
                    do {
                        items.push_back(conditional());
                    } while (accept(Tok::Comma));
                    expect(Tok::RBracket, "']'");
                }
                auto e = make(Op::ArrayLit, begin);
                e->kids = std::move(items);
                return e;
            }
            case Tok::LBrace: {
                ++pos_;
                std::vector<std::string> keys;
                std::vector<ExprPtr> vals;
                if (!accept(Tok::RBrace)) {
                    do {
                        if (peek().kind != Tok::String) fail_here("expected object key", "string key");
                        keys.push_back(peek().text);
                        ++pos_;
                        expect(Tok::Colon, "':'");
                        vals.push_back(conditional());
                    } while (accept(Tok::Comma));
                    expect(Tok::RBrace, "'}'");
                }
                auto e = make(Op::ObjectLit, begin);
                e->keys = std::move(keys);
                e->kids = std::move(vals);
                return e;
            }
            default: fail_here("expected expression", "expression");
        }
    }

    Lexer lexer_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int depth_ = 0;
};

// ---------------------------------------------------------------------------
// evaluation

std::vector<std::size_t> code_point_offsets(std::string_view s) {
    std::vector<std::size_t> offs;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) offs.push_back(i);
    }
    return offs;
}

class Evaluator {
public:
    Evaluator(std::string_view src, const Value::Object& env) : src_(src), env_(env) {}

    Value eval(const Expr& e) {
        switch (e.op) {
            case Op::Literal: return e.literal;
            case Op::Ident: {
                auto it = env_.find(e.name);
                if (it == env_.end()) fail(e, EvalErrorKind::UnknownIdent, "unknown identifier '" + e.name + "'");
                return it->second;
            }
            case Op::ArrayLit: {
                Value::Array arr;
                arr.reserve(e.kids.size());
                for (const auto& k : e.kids) arr.push_back(eval(*k));
                return arr;
            }
            case Op::ObjectLit: {
                Value::Object obj;
                for (std::size_t i = 0; i < e.kids.size(); ++i) obj[e.keys[i]] = eval(*e.kids[i]);
                return obj;
            }
            case Op::Neg: return number(e, -as_number(e, eval(*e.kids[0])));
            case Op::Not: return !as_bool(e, eval(*e.kids[0]));
            case Op::Mul: return number(e, as_number(e, eval(*e.kids[0])) * as_number(e, eval(*e.kids[1])));
            case Op::Div:
            case Op::Mod: {
                double a = as_number(e, eval(*e.kids[0]));
                double b = as_number(e, eval(*e.kids[1]));
                if (b == 0) fail(e, EvalErrorKind::DivByZero, "division by zero");
                return number(e, e.op == Op::Div ? a / b : std::fmod(a, b));
            }
            case Op::Add: {
                Value a = eval(*e.kids[0]);
                Value b = eval(*e.kids[1]);
                if (a.is_string() || b.is_string()) return to_display_string(a) + to_display_string(b);
                return number(e, as_number(e, a) + as_number(e, b));
            }
            case Op::Sub: return number(e, as_number(e, eval(*e.kids[0])) - as_number(e, eval(*e.kids[1])));
            case Op::Lt:
            case Op::Le:
            case Op::Gt:
            case Op::Ge: return compare(e, eval(*e.kids[0]), eval(*e.kids[1]));
            case Op::Eq: return eval(*e.kids[0]) == eval(*e.kids[1]);
            case Op::Ne: return !(eval(*e.kids[0]) == eval(*e.kids[1]));
            case Op::And: return as_bool(e, eval(*e.kids[0])) && as_bool(e, eval(*e.kids[1]));
            case Op::Or: return as_bool(e, eval(*e.kids[0])) || as_bool(e, eval(*e.kids[1]));
            case Op::Cond: return as_bool(e, eval(*e.kids[0])) ? eval(*e.kids[1]) : eval(*e.kids[2]);
            case Op::Member: {
                Value base = eval(*e.kids[0]);
                if (!base.is_object()) {
                    fail(e, EvalErrorKind::TypeMismatch,
                         "member access on " + std::string(type_name(base.type())));
                }
                const Value* v = base.find(e.name);
                return v ? *v : Value();
            }
            case Op::Index: return index(e, eval(*e.kids[0]), eval(*e.kids[1]));
            case Op::Call: return call(e);
        }
        return Value();
    }

private:
    [[noreturn]] void fail(const Expr& e, EvalErrorKind kind, const std::string& msg) const {
        std::string path(src_.substr(e.begin, e.end - e.begin));
        throw EvalError(kind, path, msg + " in `" + path + "`");
    }

    Value number(const Expr& e, double d) const {
        if (!std::isfinite(d)) fail(e, EvalErrorKind::NonFinite, "non-finite result");
        return Value(d);
    }

    double as_number(const Expr& e, const Value& v) const {
        if (!v.is_number()) fail(e, EvalErrorKind::TypeMismatch, "expected number, got " + std::string(type_name(v.type())));
        return v.as_number();
    }

    bool as_bool(const Expr& e, const Value& v) const {
        if (!v.is_bool()) fail(e, EvalErrorKind::TypeMismatch, "expected bool, got " + std::string(type_name(v.type())));
        return v.as_bool();
    }

    const std::string& as_string(const Expr& e, const Value& v) const {
        if (!v.is_string()) fail(e, EvalErrorKind::TypeMismatch, "expected string, got " + std::string(type_name(v.type())));
        return v.as_string();
    }

    long long as_integer(const Expr& e, const Value& v) const {
        double d = as_number(e, v);
        if (std::floor(d) != d || std::fabs(d) > 9.0e15) fail(e, EvalErrorKind::TypeMismatch, "expected integer index");
        return static_cast<long long>(d);
    }

    Value compare(const Expr& e, const Value& a, const Value& b) const {
        int c;
        if (a.is_number() && b.is_number()) {
            c = a.as_number() < b.as_number() ? -1 : (a.as_number() > b.as_number() ? 1 : 0);
        } else if (a.is_string() && b.is_string()) {
            c = a.as_string().compare(b.as_string());
        } else {
            fail(e, EvalErrorKind::TypeMismatch,
                 "cannot compare " + std::string(type_name(a.type())) + " with " + std::string(type_name(b.type())));
        }
        switch (e.op) {
            case Op::Lt: return c < 0;
            case Op::Le: return c <= 0;
            case Op::Gt: return c > 0;
            default: return c >= 0;
        }
    }

    Value index(const Expr& e, const Value& base, const Value& idx) const {
        if (base.is_object()) {
            const Value* v = base.find(as_string(e, idx));
            return v ? *v : Value();
        }
        if (base.is_array()) {
            long long i = as_integer(e, idx);
            if (i < 0 || static_cast<std::size_t>(i) >= base.as_array().size()) {
                fail(e, EvalErrorKind::IndexOutOfRange, "index " + std::to_string(i) + " out of range");
            }
            return base.as_array()[static_cast<std::size_t>(i)];
        }
        if (base.is_string()) {
            const auto& s = base.as_string();
            auto offs = code_point_offsets(s);
            long long i = as_integer(e, idx);
            if (i < 0 || static_cast<std::size_t>(i) >= offs.size()) {
                fail(e, EvalErrorKind::IndexOutOfRange, "index " + std::to_string(i) + " out of range");
            }
            std::size_t from = offs[static_cast<std::size_t>(i)];
            std::size_t to = static_cast<std::size_t>(i) + 1 < offs.size() ? offs[static_cast<std::size_t>(i) + 1] : s.size();
            return s.substr(from, to - from);
        }
        fail(e, EvalErrorKind::TypeMismatch, "cannot index " + std::string(type_name(base.type())));
    }

    static std::pair<std::size_t, std::size_t> clamp_range(long long i, long long j, std::size_t len) {
        auto norm = [len](long long k) -> std::size_t {
            if (k < 0) k += static_cast<long long>(len);
            if (k < 0) return 0;
            return std::min<std::size_t>(static_cast<std::size_t>(k), len);
        };
        std::size_t a = norm(i), b = norm(j);
        return {a, std::max(a, b)};
    }

    Value call(const Expr& e) {
        std::vector<Value> args;
        args.reserve(e.kids.size());
        for (const auto& k : e.kids) args.push_back(eval(*k));
        switch (e.fn) {
            case Builtin::Len:
                if (args[0].is_string()) return static_cast<double>(utf8_length(args[0].as_string()));
                if (args[0].is_array()) return static_cast<double>(args[0].as_array().size());
                if (args[0].is_object()) return static_cast<double>(args[0].as_object().size());
                fail(e, EvalErrorKind::TypeMismatch, "len() of " + std::string(type_name(args[0].type())));
            case Builtin::Str: return to_display_string(args[0]);
            case Builtin::Num: {
                const Value& v = args[0];
                if (v.is_number()) return v;
                if (v.is_bool()) return v.as_bool() ? 1.0 : 0.0;
                if (v.is_string()) {
                    const auto& s = v.as_string();
                    double d = 0;
                    auto res = std::from_chars(s.data(), s.data() + s.size(), d);
                    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
                        fail(e, EvalErrorKind::TypeMismatch, "num() cannot parse '" + s + "'");
                    }
                    return number(e, d);
                }
                fail(e, EvalErrorKind::TypeMismatch, "num() of " + std::string(type_name(v.type())));
            }
            case Builtin::Keys: {
                if (!args[0].is_object()) fail(e, EvalErrorKind::TypeMismatch, "keys() expects an object");
                Value::Array out;
                for (const auto& [k, _] : args[0].as_object()) out.emplace_back(k);
                return out;
            }
            case Builtin::Append: {
                if (!args[0].is_array()) fail(e, EvalErrorKind::TypeMismatch, "append() expects an array");
                Value::Array out = args[0].as_array();
                out.push_back(args[1]);
                return out;
            }
            case Builtin::Slice: {
                long long i = as_integer(e, args[1]);
                long long j = as_integer(e, args[2]);
                if (args[0].is_array()) {
                    const auto& arr = args[0].as_array();
                    auto [a, b] = clamp_range(i, j, arr.size());
                    return Value::Array(arr.begin() + static_cast<std::ptrdiff_t>(a),
                                        arr.begin() + static_cast<std::ptrdiff_t>(b));
                }
                if (args[0].is_string()) {
                    const auto& s = args[0].as_string();
                    auto offs = code_point_offsets(s);
                    auto [a, b] = clamp_range(i, j, offs.size());
                    std::size_t from = a < offs.size() ? offs[a] : s.size();
                    std::size_t to = b < offs.size() ? offs[b] : s.size();
                    return s.substr(from, to - from);
                }
                fail(e, EvalErrorKind::TypeMismatch, "slice() expects an array or string");
            }
            case Builtin::Contains: {
                const Value& hay = args[0];
                if (hay.is_string()) return hay.as_string().find(as_string(e, args[1])) != std::string::npos;
                if (hay.is_array()) {
                    const auto& arr = hay.as_array();
                    return std::find(arr.begin(), arr.end(), args[1]) != arr.end();
                }
                if (hay.is_object()) return hay.find(as_string(e, args[1])) != nullptr;
                fail(e, EvalErrorKind::TypeMismatch, "contains() expects a string, array or object");
            }
            case Builtin::Json: return to_json(args[0]);
            case Builtin::ParseJson: {
                try {
                    return aad::parse_json(as_string(e, args[0]));
                } catch (const ParseError&) {
                    fail(e, EvalErrorKind::TypeMismatch, "parse_json() got malformed JSON");
                }
            }
        }
        return Value();
    }

    std::string_view src_;
    const Value::Object& env_;
};

}  // namespace

Scriptlet Scriptlet::parse(std::string_view source) {
    Lexer lexer(source);
    auto toks = lexer.run();
    if (toks.size() > kMaxTokens) lexer.fail(toks[kMaxTokens].offset, "scriptlet too long", "shorter scriptlet");
    Parser parser(source, std::move(toks));
    Scriptlet s;
    s.root_ = parser.parse_all();
    s.source_ = std::string(source);
    return s;
}

Value Scriptlet::eval(const Value::Object& env) const { return Evaluator(source_, env).eval(*root_); }

TemplateError::TemplateError(const Error& inner, std::size_t index)
    : Error(inner.code(), "interpolation #" + std::to_string(index) + ": " + inner.what()), index_(index) {}

Template Template::parse(std::string_view text) {
    Template t;
    std::string literal;
    std::size_t index = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            literal.push_back('{');
            i += 2;
        } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            literal.push_back('}');
            i += 2;
        } else if (c == '}') {
            throw TemplateError(ScriptletParseError("unmatched '}' in template", 1, static_cast<int>(i) + 1, "'}}'"),
                                index);
        } else if (c == '{') {
            // Find the matching close brace, skipping string literals and nested braces.
            std::size_t depth = 1;
            std::size_t j = i + 1;
            bool in_str = false;
            for (; j < text.size() && depth > 0; ++j) {
                char d = text[j];
                if (in_str) {
                    if (d == '\\') {
                        ++j;
                    } else if (d == '"') {
                        in_str = false;
                    }
                } else if (d == '"') {
                    in_str = true;
                } else if (d == '{') {
                    ++depth;
                } else if (d == '}') {
                    --depth;
                }
            }
            if (depth != 0) {
                throw TemplateError(
                    ScriptletParseError("unterminated interpolation", 1, static_cast<int>(i) + 1, "'}'"), index);
            }
            std::string_view expr = text.substr(i + 1, j - i - 2);
            Piece p;
            p.literal = std::move(literal);
            literal.clear();
            try {
                p.expr = std::make_shared<Scriptlet>(Scriptlet::parse(expr));
            } catch (const Error& err) {
                throw TemplateError(err, index);
            }
            t.pieces_.push_back(std::move(p));
            ++index;
            i = j;
        } else {
            literal.push_back(c);
            ++i;
        }
    }
    if (!literal.empty()) t.pieces_.push_back(Piece{std::move(literal), nullptr});
    return t;
}

std::string Template::render(const Value::Object& env) const {
    std::string out;
    std::size_t index = 0;
    for (const auto& p : pieces_) {
        out += p.literal;
        if (!p.expr) continue;
        try {
            out += to_display_string(p.expr->eval(env));
        } catch (const Error& err) {
            throw TemplateError(err, index);
        }
        ++index;
    }
    return out;
}

std::string to_display_string(const Value& v) {
    switch (v.type()) {
        case Value::Type::Null: return "";
        case Value::Type::Bool: return v.as_bool() ? "true" : "false";
        case Value::Type::Number: return format_number(v.as_number());
        case Value::Type::String: return v.as_string();
        default: return to_json(v);
    }
}

Value eval(std::string_view source, const Value::Object& env) { return Scriptlet::parse(source).eval(env); }

std::string render(std::string_view text, const Value::Object& env) { return Template::parse(text).render(env); }

std::size_t utf8_length(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(
        s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

}  // namespace aad::scriptlet
