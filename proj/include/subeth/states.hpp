#pragma once

#include <optional>
#include <string>
#include <vector>

#include "subeth/core.hpp"
#include "subeth/lattice.hpp"
#include "subeth/linalg.hpp"

namespace subeth {

/// Hermitian, positive semidefinite, unit-trace matrix. Immutable once built.
class DensityMatrix {
 public:
  /// Validates Hermiticity (1e-10 * dim), trace (1e-10) and positivity
  /// (min eigenvalue >= -1e-10); stores the Hermitian part.
  explicit DensityMatrix(const ComplexMatrix& m);

  /// sum_i p_i |v_i><v_i| from orthonormal columns; validates the weights only.
  static DensityMatrix from_eigensystem(const ComplexMatrix& vectors, const RealVector& probabilities);

  const ComplexMatrix& matrix() const noexcept { return matrix_; }
  Index dim() const noexcept { return matrix_.rows(); }
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  DensityMatrix(ComplexMatrix m, double min_eigenvalue) : matrix_(std::move(m)), min_eigenvalue_(min_eigenvalue) {}

  ComplexMatrix matrix_;
  double min_eigenvalue_;
};

/// Reduction of |E_ket><E_bra|; traceless when the source vectors are orthogonal.
struct TransitionMatrix {
  ComplexMatrix matrix;
  Index ket_index = 0;
  Index bra_index = 0;
};

/// Equipartition of a periodic chain into contiguous blocks of equal size.
class BlockPartition {
 public:
  BlockPartition(LatticeSpec lattice, int block_size);

  const LatticeSpec& lattice() const noexcept { return lattice_; }
  int block_size() const noexcept { return block_size_; }
  int block_count() const noexcept { return block_count_; }
  /// Ascending site indices of block k (0-based).
  const std::vector<int>& sites(int k) const;
  /// Ascending union of the sites of blocks k and l (k != l).
  std::vector<int> pair_sites(int k, int l) const;
  /// Hilbert dimension of one block.
  Index block_dim() const;
  /// Minimal site-to-site ring distance between blocks k and l, in sites.
  int distance(int k, int l) const;
  void check_block(int k) const;

 private:
  LatticeSpec lattice_;
  int block_size_;
  int block_count_;
  std::vector<std::vector<int>> blocks_;
};

namespace states {

inline constexpr double kDefaultRegularization = 1e-12;

/// |v><v| for a unit vector; rejects ||v||_2 off 1 by more than 1e-10.
DensityMatrix pure_projector(const ComplexVector& v);

DensityMatrix reduce(const DensityMatrix& state, const BlockPartition& partition, int block);
TransitionMatrix reduce(const TransitionMatrix& state, const BlockPartition& partition, int block);

/// Block reduction of a pure state |v><v| computed from the vector.
DensityMatrix reduce_pure(const ComplexVector& v, const BlockPartition& partition, int block);
/// Block reduction of |ket><bra| computed from the vectors.
ComplexMatrix reduce_outer(const ComplexVector& ket, const ComplexVector& bra,
                           const BlockPartition& partition, int block);

/// Transition matrix |ket><bra| on the full lattice.
TransitionMatrix transition(const ComplexVector& ket, const ComplexVector& bra, Index ket_index,
                            Index bra_index);

struct Regularized {
  DensityMatrix state;
  bool clamped = false;
};

/// Raises every eigenvalue to at least epsilon and keeps unit trace by scaling
/// the unclamped part. Returns the input unchanged (clamped = false) when it
/// is already above epsilon.
Regularized regularize(const DensityMatrix& rho, double epsilon = kDefaultRegularization);

}  // namespace states
}  // namespace subeth
