#pragma once

// Hand-rolled generators and independent oracles shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "subeth/core.hpp"

namespace testing_support {

using subeth::Complex;
using subeth::ComplexMatrix;
using subeth::ComplexVector;
using subeth::Index;
using subeth::RealVector;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double normal() { return normal_(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  Complex complex() { return {normal(), normal()}; }

  ComplexMatrix matrix(Index rows, Index cols) {
    ComplexMatrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) m(r, c) = complex();
    }
    return m;
  }

  ComplexMatrix hermitian(Index dim) {
    const ComplexMatrix g = matrix(dim, dim);
    return 0.5 * (g + g.adjoint());
  }

  ComplexVector unit(Index dim) {
    ComplexVector v = matrix(dim, 1).col(0);
    return v / v.norm();
  }

  /// Wishart state of the given rank.
  ComplexMatrix density(Index dim, Index rank) {
    const ComplexMatrix g = matrix(dim, rank);
    ComplexMatrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint());
  }
  ComplexMatrix density(Index dim) { return density(dim, dim); }

  /// Random unitary from the QR factor of a Ginibre matrix.
  ComplexMatrix unitary(Index dim) {
    Eigen::HouseholderQR<ComplexMatrix> qr(matrix(dim, dim));
    return qr.householderQ() * ComplexMatrix::Identity(dim, dim);
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Eigenvalues via Eigen's own solver (independent of the LAPACK path).
inline RealVector oracle_eigenvalues(const ComplexMatrix& m) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (m + m.adjoint()));
  return es.eigenvalues();
}

/// Trace norm from a Jacobi SVD.
inline double oracle_trace_norm(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues().sum();
}

/// Spectral function of a Hermitian matrix via Eigen's solver.
template <class F>
ComplexMatrix oracle_function(const ComplexMatrix& m, F f) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 * (m + m.adjoint()));
  RealVector v = es.eigenvalues();
  for (Index i = 0; i < v.size(); ++i) v(i) = f(v(i));
  return es.eigenvectors() * v.asDiagonal() * es.eigenvectors().adjoint();
}

inline double oracle_entropy(const ComplexMatrix& rho) {
  double s = 0.0;
  const RealVector ev = oracle_eigenvalues(rho);
  for (Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > 1e-15) s -= ev(i) * std::log(ev(i));
  }
  return s;
}

/// Partial trace by explicit index summation on a qubit register: keep the
/// sites in `keep` (ascending), site 0 most significant.
inline ComplexMatrix oracle_partial_trace(const ComplexMatrix& m, int sites, const std::vector<int>& keep) {
  const int kept = static_cast<int>(keep.size());
  const Index dk = Index{1} << kept;
  const Index dim = Index{1} << sites;
  ComplexMatrix out = ComplexMatrix::Zero(dk, dk);
  auto bit = [&](Index x, int site) { return (x >> (sites - 1 - site)) & 1; };
  for (Index r = 0; r < dim; ++r) {
    for (Index c = 0; c < dim; ++c) {
      bool traced_equal = true;
      for (int s = 0; s < sites && traced_equal; ++s) {
        bool is_kept = false;
        for (int k : keep) is_kept = is_kept || k == s;
        if (!is_kept && bit(r, s) != bit(c, s)) traced_equal = false;
      }
      if (!traced_equal) continue;
      Index kr = 0, kc = 0;
      for (int k : keep) {
        kr = (kr << 1) | bit(r, k);
        kc = (kc << 1) | bit(c, k);
      }
      out(kr, kc) += m(r, c);
    }
  }
  return out;
}

inline ComplexMatrix diag(std::initializer_list<double> values) {
  RealVector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v.cast<Complex>().asDiagonal();
}

inline ComplexMatrix pauli_x() {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  return m;
}
inline ComplexMatrix pauli_z() { return diag({1.0, -1.0}); }

inline double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing_support
