#pragma once

#include <stdexcept>
#include <string>

namespace radstab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (u <= 0, N < 3, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The nonlinearity (or a supplied constant set) violates a standing hypothesis.
class HypothesisError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not reach its requested accuracy.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double achieved)
      : Error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Step size underflow in the ODE integrator.
class StiffnessError : public Error {
 public:
  StiffnessError(const std::string& what, double location)
      : Error(what), location_(location) {}
  double location() const noexcept { return location_; }

 private:
  double location_;
};

/// A bracket or evaluation point falls outside the configured range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// An operation was called without its precondition being met.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Numerical evidence contradicts what the theory allows; indicates a bug or
/// a tolerance problem.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A run configuration failed schema validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace radstab
