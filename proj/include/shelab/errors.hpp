#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace shelab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (t <= 0, s > t, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent experiment/solver configuration. `field` names the
/// offending key, `bound` (when non-empty) states the admissible value.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message, std::string bound = {})
      : Error(field + ": " + message), field_(std::move(field)), bound_(std::move(bound)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& bound() const noexcept { return bound_; }

 private:
  std::string field_;
  std::string bound_;
};

/// A numerical procedure failed to reach its target accuracy or stability.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& message, double achieved = 0.0)
      : Error(message), achieved_(achieved) {}

  /// Achieved tolerance / offending value, when meaningful.
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

class NonPsdError : public NumericalError {
 public:
  NonPsdError(const std::string& message, double smallest_eigenvalue)
      : NumericalError(message, smallest_eigenvalue) {}

  double smallest_eigenvalue() const noexcept { return achieved(); }
};

class BlowUpError : public NumericalError {
 public:
  BlowUpError(std::uint64_t step, double time)
      : NumericalError("non-finite value at step " + std::to_string(step) +
                           " (t = " + std::to_string(time) + ")",
                       time),
        step_(step) {}

  std::uint64_t step() const noexcept { return step_; }
  double time() const noexcept { return achieved(); }

 private:
  std::uint64_t step_;
};

/// Estimator undefined on the given path (e.g. zero variation sum).
class DegenerateEstimateError : public Error {
 public:
  using Error::Error;
};

}  // namespace shelab
