#pragma once

#include <stdexcept>
#include <string>

namespace delibq {

/// Process exit codes shared by every command line entry point.
enum class ExitCode : int {
  kOk = 0,
  kInputError = 1,
  kProviderError = 2,
  kInvariantViolation = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kInvariantViolation; }
};

/// Malformed, missing or inconsistent user input.
class InputError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kInputError; }
};

/// Precondition of a statistical routine was not met (empty arm, zero variance, ...).
class AnalysisError : public InputError {
 public:
  using InputError::InputError;
};

/// An internal invariant does not hold. Indicates a bug, not bad input.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace delibq
