#pragma once

#include <stdexcept>
#include <string>

namespace turnover {

/// Category of a failure. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Usage,         // bad arguments or configuration values
  Data,          // malformed input data, shape mismatches
  Precondition,  // missing artifacts, wrong model kind, oversized oracle runs
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& what) : DataError(what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

}  // namespace turnover
