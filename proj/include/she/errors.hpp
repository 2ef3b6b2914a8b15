#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace she {

/// Bad input: configuration, arguments, preconditions. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while computing on valid input. Maps to CLI exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonNegativityViolation : public RuntimeFailure {
 public:
  NonNegativityViolation(double u, double value)
      : RuntimeFailure("sigma(" + std::to_string(u) + ") = " + std::to_string(value) +
                       " is negative"),
        u_(u),
        value_(value) {}
  double u() const { return u_; }
  double value() const { return value_; }

 private:
  double u_;
  double value_;
};

class SimulationDiverged : public RuntimeFailure {
 public:
  explicit SimulationDiverged(std::int64_t step)
      : RuntimeFailure("simulation diverged (non-finite state) at step " + std::to_string(step)),
        step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

/// A stencil or window touched a row no longer (or not yet) resident.
class WindowUnavailable : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

/// Conditioning point too close to the spatial boundary or the final time.
class PointSkipped : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class InsufficientDomain : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class QuadratureError : public RuntimeFailure {
 public:
  QuadratureError(const std::string& what, double achieved_error)
      : RuntimeFailure(what + " (achieved error estimate " + std::to_string(achieved_error) + ")"),
        achieved_error_(achieved_error) {}
  double achieved_error() const { return achieved_error_; }

 private:
  double achieved_error_;
};

}  // namespace she
