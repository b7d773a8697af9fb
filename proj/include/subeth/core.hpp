#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace subeth {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or site layouts that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input outside the domain of an operation (non-Hermitian matrix, negative
/// eigenvalue under ln, k <= 0 for a Schatten norm, ...). `value` carries the
/// offending number.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double value) : Error(what), value_(value) {}
  double value() const noexcept { return value_; }

 private:
  double value_;
};

/// A state whose support is not contained in the reference support.
class SupportError : public Error {
 public:
  SupportError(const std::string& what, double leaked_weight)
      : Error(what), leaked_weight_(leaked_weight) {}
  double leaked_weight() const noexcept { return leaked_weight_; }

 private:
  double leaked_weight_;
};

/// Numerical tolerance on Hermiticity/positivity checks, scaled by dimension.
inline double hermitian_tolerance(Index dim) { return 1e-10 * static_cast<double>(dim); }

}  // namespace subeth
