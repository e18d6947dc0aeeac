#pragma once

#include <stdexcept>
#include <string>

namespace qvhi {

/// Invalid problem data: shape mismatches, non-SPD Gram matrices, violated
/// structural hypotheses. Never retried.
class DataError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative routine hit its iteration cap. Carries the last residual.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string &what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) +
                           ")"),
        residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

} // namespace qvhi
