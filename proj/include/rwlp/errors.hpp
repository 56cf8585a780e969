#pragma once

#include <stdexcept>
#include <string>

namespace rwlp {

// Caller broke a documented precondition (shape mismatch, bad index, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Externally supplied data failed validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A linear solve did not reach its residual target, or produced values that
// violate a provable bound.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace rwlp
