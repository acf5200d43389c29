#pragma once

#include <stdexcept>
#include <string>

namespace sgd {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, malformed files, violated preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf or hit a singular configuration.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgd
