#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace aad {

/// Base of every error the toolkit raises. `code()` is a stable machine token
/// (e.g. "UnknownNode", "ReplayMiss") used by the CLI and the wire protocol.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Malformed text with a 1-based source position.
class ParseError : public Error {
public:
    ParseError(std::string code, const std::string& message, int line, int col)
        : Error(std::move(code), message), line_(line), col_(col) {}

    int line() const noexcept { return line_; }
    int col() const noexcept { return col_; }

private:
    int line_;
    int col_;
};

}  // namespace aad
