#pragma once

#include <stdexcept>
#include <string>

namespace depol {

// Exception hierarchy. Each leaf maps onto one CLI exit code.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Violated precondition or type invariant.
class DomainError : public Error {
public:
  using Error::Error;
};

// Bad or inconsistent run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Quadrature, bisection or eigensolver failed to reach its tolerance.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double achieved_error)
      : Error(what + " (achieved error estimate " + std::to_string(achieved_error) + ")"),
        achieved_error_(achieved_error) {}
  double achieved_error() const noexcept { return achieved_error_; }

private:
  double achieved_error_;
};

// Hard-sphere insertion gave up.
class SamplingError : public Error {
public:
  using Error::Error;
};

enum class ExitCode : int {
  success = 0,
  config_error = 2,
  non_convergence = 3,
  infeasible_sampling = 4,
};

} // namespace depol
