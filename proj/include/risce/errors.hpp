#pragma once

#include <stdexcept>
#include <string>

namespace risce {

//! Invalid dimensions, budgets or parameters supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

//! A numerical kernel could not produce a result (SVD non-convergence,
//! rank-deficient dictionary, degenerate input).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//! Raised by the ALS loop when a least-squares subproblem loses column rank.
class RankCollapseError : public NumericalError {
 public:
  RankCollapseError(int iteration, const std::string& factor)
      : NumericalError("ALS rank collapse while updating " + factor +
                       " at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace risce
