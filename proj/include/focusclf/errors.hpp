#pragma once

#include <stdexcept>
#include <string>

namespace focusclf {

/// Base of every error raised by the toolkit. `exit_code()` is what the CLI
/// returns when the error escapes a subcommand (1 = input, 2 = numeric/internal).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

class InputError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 1; }
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class IoError : public InputError {
 public:
  using InputError::InputError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace focusclf
