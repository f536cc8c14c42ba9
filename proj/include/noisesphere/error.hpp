#pragma once

#include <stdexcept>
#include <string>

namespace noisesphere {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller-side mistakes: bad configuration, missing files, invalid arguments.
/// The CLI maps these to exit code 1.
class UserError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public UserError {
 public:
  using UserError::UserError;
};

class IoError : public UserError {
 public:
  using UserError::UserError;
};

/// A value lies outside the mathematical domain of an operation.
class DomainError : public UserError {
 public:
  using UserError::UserError;
};

class LimitError : public UserError {
 public:
  using UserError::UserError;
};

class ShapeError : public UserError {
 public:
  using UserError::UserError;
};

/// Non-finite values appeared during computation. Maps to exit code 2.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace noisesphere
