#pragma once

#include <stdexcept>
#include <string>

namespace scm {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input or a regime the formulas do not cover (SS with N > M, c too
// close to 1, mismatched dimensions...). The CLI maps these to exit code 2.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The support cannot be separated from the origin by a contour.
class GeometryError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Numerical failure. Carries the last residual when one is meaningful.
// The CLI maps these to exit code 3.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, double residual = 0.0)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// 1 - Gamma vanished or omega hit an eigenvalue.
class SingularityError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double residual, int nodes)
      : NumericError(what, residual), nodes_(nodes) {}
  int nodes() const noexcept { return nodes_; }

 private:
  int nodes_;
};

}  // namespace scm
