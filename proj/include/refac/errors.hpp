#pragma once

#include <stdexcept>
#include <string>

namespace refac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: bad sizes, malformed partitions, out-of-range parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be invertible (or PSD) is not, within tolerance.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace refac
