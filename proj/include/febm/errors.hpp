#pragma once

#include <stdexcept>
#include <string>

namespace febm {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Operand shapes do not conform for the requested operation.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Input outside an operation's mathematical domain (log of a non-positive
// value, invalid target parameters, ...).
struct DomainError : Error {
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

// A computation produced NaN/Inf where finite values are required, or a
// training run diverged.
struct NumericalError : Error {
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// Malformed or unreadable persistent data (checkpoints, CSV, IDX).
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Invalid run configuration: unknown keys, bad values, missing files.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace febm
