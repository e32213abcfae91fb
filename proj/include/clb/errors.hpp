#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clb {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand or tensor shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An API was called outside its contract (empty list, bad index, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

/// Inconsistent configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input text does not follow a documented grammar.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Input parses but its contents are inconsistent (dimensions, arities).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Non-finite values reached a place that requires finite ones.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace clb
