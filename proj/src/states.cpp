#include "subeth/states.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace subeth {

DensityMatrix::DensityMatrix(const ComplexMatrix& m) : min_eigenvalue_(0.0) {
  linalg::require_square(m, "DensityMatrix");
  if (!linalg::all_finite(m)) throw DomainError("DensityMatrix: non-finite entry", std::nan(""));
  const Index n = m.rows();
  const double defect = linalg::hermiticity_defect(m);
  if (defect > hermitian_tolerance(n)) {
    std::ostringstream os;
    os << "DensityMatrix: not Hermitian, defect " << defect;
    throw DomainError(os.str(), defect);
  }
  matrix_ = 0.5 * (m + m.adjoint());
  const double tr = matrix_.trace().real();
  if (std::abs(tr - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "DensityMatrix: trace " << tr << " is not 1";
    throw DomainError(os.str(), tr);
  }
  min_eigenvalue_ = linalg::hermitian_eig(matrix_).eigenvalues(0);
  if (min_eigenvalue_ < -1e-10) {
    std::ostringstream os;
    os << "DensityMatrix: negative eigenvalue " << min_eigenvalue_;
    throw DomainError(os.str(), min_eigenvalue_);
  }
}

DensityMatrix DensityMatrix::from_eigensystem(const ComplexMatrix& vectors,
                                              const RealVector& probabilities) {
  if (vectors.cols() != probabilities.size() || vectors.rows() == 0) {
    throw DimensionError("DensityMatrix::from_eigensystem: weight count does not match vectors");
  }
  const double min_p = probabilities.minCoeff();
  if (min_p < -1e-10) throw DomainError("DensityMatrix: negative weight", min_p);
  const double total = probabilities.sum();
  if (std::abs(total - 1.0) > 1e-10) throw DomainError("DensityMatrix: weights do not sum to 1", total);
  ComplexMatrix m = vectors * probabilities.asDiagonal() * vectors.adjoint();
  m = 0.5 * (m + m.adjoint()).eval();
  const double min_eig = vectors.cols() == vectors.rows() ? min_p : 0.0;
  return DensityMatrix(std::move(m), min_eig);
}

BlockPartition::BlockPartition(LatticeSpec lattice, int block_size)
    : lattice_(lattice), block_size_(block_size), block_count_(0) {
  lattice_.validate();
  if (block_size < 1 || block_size > lattice_.sites) {
    throw DimensionError("block size must lie in [1, N]");
  }
  if (lattice_.sites % block_size != 0) {
    std::ostringstream os;
    os << "N = " << lattice_.sites << " is not divisible by N_A = " << block_size;
    throw DimensionError(os.str());
  }
  block_count_ = lattice_.sites / block_size;
  blocks_.resize(static_cast<std::size_t>(block_count_));
  for (int k = 0; k < block_count_; ++k) {
    for (int s = 0; s < block_size; ++s) blocks_[static_cast<std::size_t>(k)].push_back(k * block_size + s);
  }
}

void BlockPartition::check_block(int k) const {
  if (k < 0 || k >= block_count_) {
    std::ostringstream os;
    os << "block index " << k << " out of range [0, " << block_count_ << ")";
    throw DimensionError(os.str());
  }
}

const std::vector<int>& BlockPartition::sites(int k) const {
  check_block(k);
  return blocks_[static_cast<std::size_t>(k)];
}

std::vector<int> BlockPartition::pair_sites(int k, int l) const {
  check_block(k);
  check_block(l);
  if (k == l) throw DimensionError("pair_sites needs two distinct blocks");
  std::vector<int> out = sites(k);
  const auto& other = sites(l);
  out.insert(out.end(), other.begin(), other.end());
  std::sort(out.begin(), out.end());
  return out;
}

Index BlockPartition::block_dim() const {
  Index d = 1;
  for (int s = 0; s < block_size_; ++s) d *= lattice_.local_dim;
  return d;
}

int BlockPartition::distance(int k, int l) const {
  check_block(k);
  check_block(l);
  if (k == l) return 0;
  const int n = lattice_.sites;
  int best = n;
  for (int a : sites(k)) {
    for (int b : sites(l)) {
      const int d = std::abs(a - b);
      best = std::min(best, std::min(d, n - d));
    }
  }
  return best;
}

namespace states {

DensityMatrix pure_projector(const ComplexVector& v) {
  const double norm = v.norm();
  if (std::abs(norm - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "pure_projector: vector norm " << norm << " is not 1";
    throw DomainError(os.str(), norm);
  }
  return DensityMatrix(v * v.adjoint());
}

DensityMatrix reduce(const DensityMatrix& state, const BlockPartition& partition, int block) {
  const auto& keep = partition.sites(block);
  const auto dims = partition.lattice().site_dims();
  return DensityMatrix(linalg::partial_trace(state.matrix(), dims, keep));
}

TransitionMatrix reduce(const TransitionMatrix& state, const BlockPartition& partition, int block) {
  const auto& keep = partition.sites(block);
  const auto dims = partition.lattice().site_dims();
  return {linalg::partial_trace(state.matrix, dims, keep), state.ket_index, state.bra_index};
}

DensityMatrix reduce_pure(const ComplexVector& v, const BlockPartition& partition, int block) {
  return DensityMatrix(reduce_outer(v, v, partition, block));
}

ComplexMatrix reduce_outer(const ComplexVector& ket, const ComplexVector& bra,
                           const BlockPartition& partition, int block) {
  const auto dims = partition.lattice().site_dims();
  return linalg::partial_trace_outer(ket, bra, dims, partition.sites(block));
}

TransitionMatrix transition(const ComplexVector& ket, const ComplexVector& bra, Index ket_index,
                            Index bra_index) {
  if (ket.size() != bra.size()) throw DimensionError("transition: vector lengths differ");
  return {ket * bra.adjoint(), ket_index, bra_index};
}

Regularized regularize(const DensityMatrix& rho, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("regularize: epsilon must be positive", epsilon);
  const Index n = rho.dim();
  if (epsilon * static_cast<double>(n) >= 1.0) {
    throw DomainError("regularize: epsilon too large for the dimension", epsilon);
  }
  const SpectralDecomposition eig = linalg::hermitian_eig(rho.matrix());
  if (eig.eigenvalues(0) >= epsilon) return {rho, false};

  // Clamp the low part to epsilon; rescale the rest so the trace stays 1.
  // Repeat while rescaling pushes further eigenvalues below epsilon.
  RealVector lam = eig.eigenvalues.cwiseMax(0.0);
  std::vector<bool> clamped(static_cast<std::size_t>(n), false);
  for (int pass = 0; pass < n + 1; ++pass) {
    double free_mass = 0.0;
    Index fixed = 0;
    for (Index i = 0; i < n; ++i) {
      if (clamped[static_cast<std::size_t>(i)] || lam(i) < epsilon) {
        clamped[static_cast<std::size_t>(i)] = true;
        ++fixed;
      } else {
        free_mass += lam(i);
      }
    }
    const double scale = (1.0 - epsilon * static_cast<double>(fixed)) / free_mass;
    bool stable = true;
    for (Index i = 0; i < n; ++i) {
      if (clamped[static_cast<std::size_t>(i)]) {
        lam(i) = epsilon;
      } else {
        lam(i) *= scale;
        if (lam(i) < epsilon) stable = false;
      }
    }
    if (stable) break;
  }
  return {DensityMatrix::from_eigensystem(eig.eigenvectors, lam), true};
}

}  // namespace states
}  // namespace subeth
