#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bubblelab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter lies outside the admissible domain (integer alpha, |y| >= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An operation was called with inputs violating its precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Too few samples for a fit or a derivative table.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Newton, continuation or eigensolver failure. Carries the iteration trace.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> trace = {})
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Run configuration failed schema validation.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::vector<std::string> fields)
      : Error(what), fields_(std::move(fields)) {}
  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  std::vector<std::string> fields_;
};

}  // namespace bubblelab
