#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace trialscreen {

/// Base of every error the library throws on purpose. Argument misuse is
/// reported with std::invalid_argument instead.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input bytes. `offset()` is the byte position where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Well-formed input that violates the record schema (missing criterion, bad label...).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Unreadable or inconsistent file layout (index files, mixed corpus directories, manifests).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Configuration or precondition failures detected before any work is done.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A saved index was built with a different embedder or chunk policy than the current config.
class StaleIndexError : public Error {
public:
    using Error::Error;
};

/// Remote service failure after retries were exhausted.
class BackendError : public Error {
public:
    BackendError(const std::string& what, int status = 0, std::string body = {})
        : Error(what), status_(status), body_(std::move(body)) {}
    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

/// A remote service answered, but with a payload that breaks the wire contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Verdicts do not cover the gold (patient, criterion) grid exactly once.
class CoverageError : public Error {
public:
    CoverageError(const std::string& what, std::vector<std::string> pairs)
        : Error(what), pairs_(std::move(pairs)) {}
    const std::vector<std::string>& pairs() const noexcept { return pairs_; }

private:
    std::vector<std::string> pairs_;
};

}  // namespace trialscreen

namespace trialscreen {

/// A screening run stopped before every (patient, criterion) pair had a verdict.
class IncompleteRunError : public Error {
public:
    IncompleteRunError(const std::string& what, std::vector<std::string> missing)
        : Error(what), missing_(std::move(missing)) {}
    const std::vector<std::string>& missing() const noexcept { return missing_; }

private:
    std::vector<std::string> missing_;
};

}  // namespace trialscreen
