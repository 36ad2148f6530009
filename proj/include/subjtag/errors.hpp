#pragma once

#include <stdexcept>
#include <string>

namespace subjtag {

// Failure classes; each maps to a distinct C-API status / CLI exit code.
enum class ErrorKind {
    Config,    // invalid configuration or argument
    Io,        // filesystem failure
    Parse,     // malformed input data
    Service,   // remote service failure
    Internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace subjtag
