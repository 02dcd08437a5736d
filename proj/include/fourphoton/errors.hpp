#pragma once

#include <stdexcept>
#include <string>

namespace fourphoton {

/// Input outside the mathematical or physical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Requested model is not defined for the given input (e.g. a long-pass
/// filter where a Gaussian spectrum is required).
class UnsupportedModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Least-squares dip fit failed; carries the final residual norm.
class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, double residual_norm, int iterations)
      : std::runtime_error(what + " (residual norm " + std::to_string(residual_norm) +
                           " after " + std::to_string(iterations) + " iterations)"),
        residual_norm_(residual_norm),
        iterations_(iterations) {}

  double residual_norm() const noexcept { return residual_norm_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_norm_;
  int iterations_;
};

}  // namespace fourphoton
