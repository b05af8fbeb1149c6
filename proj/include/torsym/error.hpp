#pragma once

#include <stdexcept>
#include <string>

namespace torsym {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, contradictory regime relations, grid mismatches.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed field files or config documents. The message carries the position.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, solver breakdown, failed projections.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace torsym
