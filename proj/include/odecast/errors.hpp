#pragma once

#include <stdexcept>
#include <string>

namespace odecast {

// Thrown when tensor shapes or layer dimensions do not line up.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// A violated call contract (non-scalar loss, missing gradient, bad window length, ...).
class ContractError : public std::runtime_error {
public:
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Input data problems: unreadable files, malformed rows, degenerate splits.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint/config incompatibility.
class ConfigMismatchError : public std::runtime_error {
public:
    explicit ConfigMismatchError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace odecast
