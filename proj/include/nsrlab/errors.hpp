#pragma once

#include <stdexcept>
#include <string>

namespace nsrlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when a policy table does not match the shape an operation expects
/// (missing prefix node, wrong vocabulary, mismatched gradient table).
class InconsistentPolicy : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

/// Configuration error carrying the dotted field path that failed validation,
/// e.g. "objective.family".
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace nsrlab
