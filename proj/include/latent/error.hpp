#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace latent {

enum class ErrorKind {
    InvalidArgument,
    DimensionMismatch,
    SingularSystem,
    NonFiniteLoss,
    TooFewPoints,
    IndexOutOfRange,
    NoEligibleCentroid,
    LinearizationBreakdown,
    ParseError,
    InconsistentDim,
    EmptyGroup,
    SpecInvalid,
    Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so callers (and the CLI's
// structured diagnostics) can branch on it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& message)
        : Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

}  // namespace latent
