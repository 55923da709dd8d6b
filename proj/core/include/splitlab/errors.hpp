#pragma once

#include <stdexcept>
#include <string>

namespace splitlab {

/// Numerical blow-up (NaN/Inf) inside an iterative routine. Carries the
/// iteration index at which the non-finite value was first observed.
class divergence_error : public std::runtime_error {
public:
  divergence_error(const std::string& what, long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}
  long step() const noexcept { return step_; }

private:
  long step_;
};

/// Rejection-sampling budget exhausted while generating a ground truth.
class generation_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A splitting group whose total projection onto its true neuron is
/// nonpositive; splitting coefficients are undefined for it.
class degenerate_group_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// No draw survived the validity filters, so a report would be empty.
class empty_report_error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace splitlab
