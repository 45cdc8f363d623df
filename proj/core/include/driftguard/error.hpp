#pragma once

#include <stdexcept>
#include <string>

namespace driftguard {

// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Array shape or dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on argument values failed (negative lambda, non-orthonormal basis, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Mean difference too small to define a drift direction.
class NoDriftError : public Error {
 public:
  using Error::Error;
};

// Requested subspace rank exceeds the numerical rank of the input.
class RankError : public Error {
 public:
  explicit RankError(const std::string& what, std::size_t attained)
      : Error(what), attained_rank(attained) {}
  std::size_t attained_rank;
};

// Malformed or inconsistent input data (CSV parsing, split counts).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss, divergence, or a failed numerical identity.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace driftguard
