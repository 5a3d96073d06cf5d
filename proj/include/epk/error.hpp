#pragma once

#include <stdexcept>
#include <string>

namespace epk {

/// Precondition violated by the caller (bad shape, negative threshold, ...).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative routine hit its iteration cap without meeting its contract.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable or malformed input file.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input parses but is inconsistent (missing joints, count mismatch, ...).
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or missing configuration value.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace epk
