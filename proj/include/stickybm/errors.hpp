#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stickybm {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input: dimensions, partitions, config documents.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
  explicit ConfigError(std::vector<std::string> issues);

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// A documented precondition of an operation does not hold for the given model.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Argument outside the domain where the quantity is defined (e.g. theta > 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularSystemError : public NumericalError {
 public:
  SingularSystemError(const std::string& what, double condition_estimate)
      : NumericalError(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// The per-step complementarity solve failed; carries the state it failed on.
class StepFailureError : public NumericalError {
 public:
  StepFailureError(const std::string& what, std::vector<double> state,
                   std::vector<double> increment)
      : NumericalError(what),
        state_(std::move(state)),
        increment_(std::move(increment)) {}
  const std::vector<double>& state() const { return state_; }
  const std::vector<double>& increment() const { return increment_; }

 private:
  std::vector<double> state_;
  std::vector<double> increment_;
};

class IntegrityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Too few tail observations to fit; the message recommends a longer run.
class DataStarvedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// No feasible path across all optimizer restarts; keeps the best
/// infeasible candidate's figures.
class OptimizationFailure : public NumericalError {
 public:
  OptimizationFailure(const std::string& what, double best_value, double best_terminal_error)
      : NumericalError(what), best_value_(best_value), best_terminal_error_(best_terminal_error) {}
  double best_value() const { return best_value_; }
  double best_terminal_error() const { return best_terminal_error_; }

 private:
  double best_value_;
  double best_terminal_error_;
};

class DependencyError : public Error {
 public:
  using Error::Error;
};

/// An error escaping a CLI command, prefixed with the command and config
/// path; keeps the exit status of the original error.
class CommandError : public Error {
 public:
  CommandError(const std::string& what, int exit_code) : Error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

/// Process exit status for an exception escaping a CLI command:
/// 2 = configuration error, 3 = runtime/numerical failure.
int exit_code_for(const std::exception& e);

}  // namespace stickybm
