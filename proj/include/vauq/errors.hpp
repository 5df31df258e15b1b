#pragma once

#include <stdexcept>
#include <string>

namespace vauq {

/// Broad failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  invalid_argument,
  config,
  backend,
  data,
  degenerate,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(ErrorKind::invalid_argument, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(ErrorKind::backend, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Raised when a sample has no generated tokens and cannot be scored.
class DegenerateSample : public Error {
 public:
  explicit DegenerateSample(const std::string& what) : Error(ErrorKind::degenerate, what) {}
};

}  // namespace vauq
