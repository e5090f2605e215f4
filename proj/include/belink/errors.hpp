#pragma once

#include <stdexcept>
#include <string>

namespace belink {

// Input files that fail to parse. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, size_t line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                      : message),
          line_(line) {}

    size_t line() const { return line_; }

private:
    size_t line_;
};

// Backend unreachable / request failed after all retries.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Backend reachable but the response violates the wire contract.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller violated an operation precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace belink
