#pragma once

#include <stdexcept>
#include <string>

namespace dsj {

/// Coarse error classes; the CLI maps each one onto a stable exit status.
enum class ErrorCategory {
  config = 2,
  infeasible = 3,
  numerical = 4,
  io = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

// Configuration and argument problems.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(ErrorCategory::config, field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCategory::config, "shape error: " + what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCategory::config, "domain error: " + what) {}
};

class GridError : public Error {
 public:
  explicit GridError(const std::string& what) : Error(ErrorCategory::config, "grid error: " + what) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(ErrorCategory::config, "state error: " + what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorCategory::config, "parse error: " + what) {}
};

class UnknownKeyError : public Error {
 public:
  explicit UnknownKeyError(const std::string& what) : Error(ErrorCategory::config, "unknown key: " + what) {}
};

// Design targets the mechanism cannot realize.
class InfeasibleTargetError : public Error {
 public:
  InfeasibleTargetError(const std::string& what, double eigenvalue)
      : Error(ErrorCategory::infeasible, "infeasible target: " + what), eigenvalue_(eigenvalue) {}

  /// Eigenvalue that violated the feasibility window (of K_desired, or of K_max - K_desired).
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

class StructureError : public Error {
 public:
  StructureError(const std::string& what, double residual)
      : Error(ErrorCategory::infeasible, "unrealizable stiffness structure: " + what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Numerical failures.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, "numerical error: " + what) {}
};

class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& what) : Error(ErrorCategory::numerical, "singular matrix: " + what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(ErrorCategory::numerical, "no convergence: " + what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class RegressionError : public Error {
 public:
  explicit RegressionError(const std::string& what) : Error(ErrorCategory::numerical, "regression error: " + what) {}
};

class StepSizeError : public Error {
 public:
  explicit StepSizeError(const std::string& what)
      : Error(ErrorCategory::numerical, "integration unstable: " + what + "; reduce dt") {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, "I/O error: " + what) {}
};

}  // namespace dsj
