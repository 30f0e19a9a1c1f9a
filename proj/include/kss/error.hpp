#pragma once

#include <stdexcept>
#include <string>

namespace kss {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or record.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Incompatible dimensions between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its documented range, or unresolved reference.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace detail
}  // namespace kss
