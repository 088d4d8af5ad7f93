#pragma once

#include <stdexcept>
#include <string>

namespace privlex {

/// Validation errors are caller mistakes (bad config, malformed input file);
/// everything else is a runtime failure. The CLI maps these to exit codes 2 and 1.
enum class ErrorKind { Validation, Runtime };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class RuntimeError : public Error {
public:
    explicit RuntimeError(const std::string& what) : Error(ErrorKind::Runtime, what) {}
};

}  // namespace privlex
