#pragma once

#include <stdexcept>
#include <string>

namespace ppd {

// Schema or input violations (CLI exit code 2).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Constraint sets with no feasible point (CLI exit code 3).
class InfeasibleConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested operation outside the supported surface (custom loss bounds,
// oversized oracle inputs, non-differentiable losses).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure; the message carries the diagnostic (e.g. condition number).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sampler ran out of proposals (CLI exit code 4). Carries the partial tally so
// callers can inspect the observed acceptance rate.
class BudgetExhaustedError : public std::runtime_error {
 public:
  BudgetExhaustedError(const std::string& what, long long accepted, long long proposed)
      : std::runtime_error(what), accepted_(accepted), proposed_(proposed) {}

  long long accepted() const { return accepted_; }
  long long proposed() const { return proposed_; }
  double acceptance_rate() const {
    return proposed_ > 0 ? static_cast<double>(accepted_) / static_cast<double>(proposed_) : 0.0;
  }

 private:
  long long accepted_;
  long long proposed_;
};

// Importance sampler produced an all-zero weight vector.
class DegenerateWeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ppd
