#pragma once

#include <stdexcept>
#include <string>

namespace osf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Exact-arithmetic tables are too small for the requested labels.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Shapes or dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A state or map left the CPTP set beyond tolerance.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Graph-level failure (disconnected cut, ambiguous gluing, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Numerical procedure could not produce a meaningful answer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace osf
