#pragma once

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>

namespace codesign {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input (point encodings, tables, CSV imports, checkpoints).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A latency query hit a (variant, hw projection) pair with no entry and no fallback.
class CoverageGap : public Error {
public:
    using Error::Error;
};

class NotInTable : public Error {
public:
    using Error::Error;
};

class DuplicateDigest : public Error {
public:
    using Error::Error;
};

/// Scenario or calibration configuration problem; carries the offending key.
class ConfigError : public Error {
public:
    ConfigError(const std::string& key, const std::string& what, std::size_t line = 0)
        : Error((line ? "line " + std::to_string(line) + ", " : std::string()) + "key '" + key + "': " + what),
          key_(key) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class NonFiniteGradient : public Error {
public:
    using Error::Error;
};

/// A point handed to the evaluator whose cell does not validate.
class InvalidPoint : public Error {
public:
    using Error::Error;
};

/// Wraps the first failure of a batch evaluation together with its input index.
class BatchError : public Error {
public:
    BatchError(std::size_t index, const std::string& what, std::exception_ptr cause = nullptr)
        : Error("batch item " + std::to_string(index) + ": " + what), index_(index), cause_(std::move(cause)) {}

    std::size_t index() const noexcept { return index_; }
    /// The original exception, for callers that dispatch on its type.
    std::exception_ptr cause() const noexcept { return cause_; }

private:
    std::size_t index_;
    std::exception_ptr cause_;
};

} // namespace codesign
