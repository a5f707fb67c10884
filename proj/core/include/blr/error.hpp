#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blr {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation's contract (bad dimension, out-of-range
/// index, inconsistent configuration).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Input data could not be used: malformed files, empty datasets, I/O failures.
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

enum class FormatErrorKind { bad_magic, version_mismatch, truncated, wrong_kind, io };

/// Binary file (model or interaction set) failed validation on load.
class FormatError : public DataError {
public:
    FormatError(FormatErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}

    FormatErrorKind kind() const noexcept { return kind_; }

private:
    FormatErrorKind kind_;
};

/// Training diverged or hit a numerical fault.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace blr
