#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "subeth/core.hpp"
#include "subeth/lattice.hpp"

namespace subeth {

/// Eigensystem of a Hermitian matrix: ascending eigenvalues, eigenvectors in
/// the columns of a unitary matrix.
struct SpectralDecomposition {
  RealVector eigenvalues;
  ComplexMatrix eigenvectors;

  Index dim() const { return eigenvalues.size(); }
  /// U diag(values) U^dagger for a replacement spectrum.
  ComplexMatrix reconstruct(const RealVector& values) const;
  ComplexMatrix reconstruct() const { return reconstruct(eigenvalues); }
};

namespace linalg {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Induced infinity norm (maximum absolute row sum).
double inf_norm(const ComplexMatrix& m);
/// inf_norm(M - M^dagger); throws DimensionError for non-square input.
double hermiticity_defect(const ComplexMatrix& m);
bool all_finite(const ComplexMatrix& m);

void require_square(const ComplexMatrix& m, std::string_view what);
void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, std::string_view what);

/// Dense Hermitian eigensolver (LAPACK *heevd / *syevd). Purely real input
/// takes the real symmetric path. Rejects non-square input and input whose
/// Hermiticity defect exceeds 1e-10 * dim; the Hermitian part is diagonalized.
SpectralDecomposition hermitian_eig(const ComplexMatrix& m);

/// Predicate on eigenvalues guarding a scalar function's domain.
using EigenvalueGuard = std::function<bool(double)>;
using ScalarFunction = std::function<double(double)>;

/// f(M) = U diag(f(lambda)) U^dagger. Throws DomainError reporting the first
/// eigenvalue rejected by `guard`.
ComplexMatrix matrix_function(const ComplexMatrix& m, const ScalarFunction& f,
                              const EigenvalueGuard& guard = {}, std::string_view name = "f");
ComplexMatrix matrix_function(const SpectralDecomposition& eig, const ScalarFunction& f,
                              const EigenvalueGuard& guard = {}, std::string_view name = "f");

ComplexMatrix matrix_log(const ComplexMatrix& m);
ComplexMatrix matrix_exp(const ComplexMatrix& m);
ComplexMatrix matrix_sqrt(const ComplexMatrix& m);
ComplexMatrix matrix_inv_sqrt(const ComplexMatrix& m);
/// m^p for positive definite m (any real p) or positive semidefinite m (p > 0).
ComplexMatrix matrix_power(const ComplexMatrix& m, double p);

/// Singular values, descending. Hermitian input uses |eigenvalues|; general
/// input uses the Hermitian dilation [[0, M], [M^dagger, 0]] whose spectrum is
/// {+s_i, -s_i}.
RealVector singular_values(const ComplexMatrix& m);

/// (sum_i s_i^k)^(1/k); k = kInfinity gives max s_i. Throws DomainError for k <= 0.
double schatten_norm(const ComplexMatrix& m, double k);

/// Trace-distance convention of the ETH literature: 0.5 * ||a - b||_1.
double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b);

/// Kronecker product a (x) b with a as the more significant factor.
ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

/// Factorization of a tensor-product basis into (kept sites, traced sites).
/// Row `rows[t * kept_dim + k]` is the full index with kept digit string k and
/// traced digit string t. Reusable across many vectors of the same layout.
class SiteSplit {
 public:
  SiteSplit(std::span<const int> site_dims, std::span<const int> keep);

  Index full_dim() const { return full_dim_; }
  Index kept_dim() const { return kept_dim_; }
  Index traced_dim() const { return traced_dim_; }
  Index row(Index traced, Index kept) const { return rows_[static_cast<std::size_t>(traced * kept_dim_ + kept)]; }

  /// v reshaped as a kept_dim x traced_dim matrix.
  ComplexMatrix gather(const ComplexVector& v) const;
  ComplexVector scatter(const ComplexMatrix& g) const;

 private:
  Index full_dim_ = 0;
  Index kept_dim_ = 0;
  Index traced_dim_ = 0;
  std::vector<Index> rows_;
};

/// Reduced operator on the sites in `keep` (kept in ascending order). Throws
/// DimensionError when prod(site_dims) != dim or `keep` is empty/out of range.
ComplexMatrix partial_trace(const ComplexMatrix& m, std::span<const int> site_dims,
                            std::span<const int> keep);

/// Tr_{complement}(|ket><bra|) without forming the outer product.
ComplexMatrix partial_trace_outer(const ComplexVector& ket, const ComplexVector& bra,
                                  std::span<const int> site_dims, std::span<const int> keep);

/// op acting on `sites` (ascending, op ordered the same way) tensored with
/// identity elsewhere, as a dense full-space matrix.
ComplexMatrix embed(const ComplexMatrix& op, std::span<const int> site_dims,
                    std::span<const int> sites);

/// (op on `sites`) applied to a full-space vector, without forming the
/// embedded matrix.
ComplexVector apply_local(const ComplexMatrix& op, std::span<const int> site_dims,
                          std::span<const int> sites, const ComplexVector& v);
ComplexVector apply_local(const ComplexMatrix& op, const SiteSplit& split, const ComplexVector& v);

/// Basis-index permutation of the cyclic site shift: perm[a] is the index of
/// T^shift |a>, where T moves the state of site j to site j+1 (mod N).
std::vector<Index> translation_permutation(const LatticeSpec& lattice, int shift);

/// T^shift X T^-shift. The content acting on site s ends up on site s+shift.
ComplexMatrix translate(const ComplexMatrix& x, const LatticeSpec& lattice, int shift);
ComplexVector translate(const ComplexVector& v, const LatticeSpec& lattice, int shift);

}  // namespace linalg
}  // namespace subeth
