#pragma once

#include <stdexcept>
#include <string>

namespace desens {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Document does not follow the annotation schema.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value parsed fine but breaks a domain invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A ratio or mean was requested over an empty set; the caller picks the semantics.
class EmptyError : public Error {
 public:
  using Error::Error;
};

/// Data-level failure (missing frame, bad image bytes, out-of-order input).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace desens
