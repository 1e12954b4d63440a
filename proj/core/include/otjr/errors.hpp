#pragma once

#include <stdexcept>
#include <string>

namespace otjr {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition or shape contract was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf or failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A configuration document is malformed or inconsistent.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace otjr
