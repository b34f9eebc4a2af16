#pragma once

#include <stdexcept>
#include <string>

namespace polyquant {

/// Base of every error raised by the library. The CLI maps these to exit status 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (q <= 0, beta <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Evaluation would need the law beyond its numeric window.
class TruncationError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// An integrand produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

/// Malformed or invalid model document.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace polyquant
