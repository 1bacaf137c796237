#pragma once

#include <stdexcept>
#include <string>

namespace cxqsm {

/// Broad failure categories; the CLI maps each one to its own exit code.
enum class ErrorKind {
    io,
    format,
    validation,
    architecture,
    convergence,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::io: return "io";
        case ErrorKind::format: return "format";
        case ErrorKind::validation: return "validation";
        case ErrorKind::architecture: return "architecture";
        case ErrorKind::convergence: return "convergence";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
    if (!condition) fail(ErrorKind::validation, what);
}

}  // namespace cxqsm
