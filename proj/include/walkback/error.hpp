#pragma once

#include <stdexcept>
#include <string>

namespace walkback {

// Error taxonomy used across the library. CLI maps these to one-line
// machine-parseable messages and a nonzero exit code.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad shapes, bad flags, invalid construction parameters.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

// API misuse: stale tape, backward without forward, gradients on a
// non-trainable operator.
struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error("usage: " + msg) {}
};

// Value outside the mathematical domain of an operation.
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error("domain: " + msg) {}
};

// Non-finite state or density produced by an operator.
struct OperatorError : Error {
    explicit OperatorError(const std::string& msg) : Error("operator: " + msg) {}
};

// Divergence or non-finite gradients during optimization.
struct TrainingError : Error {
    explicit TrainingError(const std::string& msg) : Error("training: " + msg) {}
};

// Malformed input files.
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("parse: " + msg) {}
};

}  // namespace walkback
