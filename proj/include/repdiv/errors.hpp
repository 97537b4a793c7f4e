#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace repdiv {

// Process exit codes used by the command-line front end.
enum class ExitCode : int {
    success = 0,
    usage = 2,
    data = 3,
    numeric = 4,
};

/// Base class for every error raised by the library. `code()` is a short
/// machine-readable identifier ("parse_error", "fit_degenerate", ...).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, ExitCode exit)
        : std::runtime_error(message), code_(std::move(code)), exit_(exit) {}

    const std::string& code() const noexcept { return code_; }
    ExitCode exit_code() const noexcept { return exit_; }

private:
    std::string code_;
    ExitCode exit_;
};

/// Invalid argument to a numerical routine (non-positive shape, empty sample, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& message)
        : Error("domain_error", message, ExitCode::numeric) {}
};

/// Numerical failure: singular information, degenerate likelihood, unstable calibration.
class NumericError : public Error {
public:
    NumericError(std::string code, const std::string& message)
        : Error(std::move(code), message, ExitCode::numeric) {}
};

/// Problem with the input data itself.
class DataError : public Error {
public:
    DataError(std::string code, const std::string& message)
        : Error(std::move(code), message, ExitCode::data) {}
};

/// Bad command-line arguments or configuration values.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& message)
        : Error("usage_error", message, ExitCode::usage) {}
};

class ParseError : public DataError {
public:
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : DataError("parse_error", path + ":" + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace repdiv
