#pragma once

#include <stdexcept>
#include <string>

namespace wasserquick {

// Error categories map one-to-one onto CLI exit codes (see cli.hpp).

class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

class InvariantViolation : public std::logic_error {
 public:
  explicit InvariantViolation(const std::string& what) : std::logic_error(what) {}
};

// The problem has no finite solution (e.g. no absolutely continuous pair
// inside the two balls).
class InfeasibleProblem : public std::runtime_error {
 public:
  explicit InfeasibleProblem(const std::string& what) : std::runtime_error(what) {}
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Threshold calibration cannot reach the target ARL within the horizon.
class CalibrationError : public std::runtime_error {
 public:
  explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wasserquick
