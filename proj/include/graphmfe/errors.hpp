#pragma once

#include <stdexcept>
#include <string>

namespace graphmfe {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid graph construction or graph file (disconnected, bad weights, malformed JSON).
class GraphError : public Error {
 public:
  using Error::Error;
};

class UnknownVertex : public Error {
 public:
  explicit UnknownVertex(const std::string& id) : Error("unknown vertex '" + id + "'") {}
};

/// A field was passed to an operation on a graph it is not bound to.
class BindingMismatch : public Error {
 public:
  BindingMismatch() : Error("vertex field is not bound to this graph") {}
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NonpositiveK : public InvalidArgument {
 public:
  explicit NonpositiveK(double k)
      : InvalidArgument("screening constant must be positive, got " + std::to_string(k)) {}
};

/// Poisson right-hand side does not integrate to zero, so no solution exists.
class CompatibilityViolated : public Error {
 public:
  using Error::Error;
};

class SolveFailed : public Error {
 public:
  using Error::Error;
};

/// exp(u) would overflow a double.
class ExpOverflow : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class AmbiguousCriticalSet : public Error {
 public:
  using Error::Error;
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

}  // namespace graphmfe
