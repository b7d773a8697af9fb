#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "subeth/core.hpp"
#include "subeth/states.hpp"

namespace subeth {

/// Block state entering a formal observable or a recovery map: a density
/// matrix (diagonal case) or an off-diagonal transition matrix.
using BlockOperand = std::variant<DensityMatrix, TransitionMatrix>;

/// J_rho^{-1/2}(sigma) together with where it lives and what produced it.
struct FormalObservable {
  enum class Kind { kDiagonal, kOffDiagonal };

  ComplexMatrix matrix;
  Kind kind = Kind::kDiagonal;
  /// Block index, or -1 for the translation average over all blocks.
  int block = 0;
  std::string source;
  bool regularized = false;
};

/// Divergences and inequality slacks for one (sigma, rho) pair. Entropic
/// fields are empty for off-diagonal (traceless) sigma.
struct DivergenceReport {
  std::optional<double> umegaki;
  std::optional<double> bs_form1;
  std::optional<double> bs_form2;
  std::optional<double> bs_form3;
  /// Full Schatten-1 norm ||sigma - rho||_1 (||sigma||_1 for off-diagonal).
  double trace_norm = 0.0;
  /// 0.5 * trace_norm.
  double trace_distance = 0.0;
  /// V(rho, O) for O = J_rho^{-1/2}(sigma).
  double variance = 0.0;
  /// S - 0.5 ||sigma - rho||_1^2.
  std::optional<double> pinsker_slack;
  /// S_BS - S.
  std::optional<double> bs_vs_umegaki_slack;
  /// V - ||.||_1^2.
  double hoelder_slack = 0.0;
  std::optional<double> pullup_residual;
  bool regularization_flag = false;

  /// Smallest slack; theorem-level inequalities require it >= -1e-8.
  double min_slack() const;
  double max_form_disagreement() const;
};

namespace divergences {

inline constexpr double kIdentityTol = 1e-8;
inline constexpr double kChainedTol = 1e-6;

/// V(rho, A) = Tr(rho A A^dagger) - |Tr rho A|^2.
double quantum_variance(const DensityMatrix& rho, const ComplexMatrix& a);
/// Same functional on a raw Hermitian PSD matrix (no validation).
double quantum_variance(const ComplexMatrix& rho, const ComplexMatrix& a);

/// Delta(rho, A) = sum_j p_j |<v_j|A|v_j>|^2 - |Tr rho A|^2 for a basis that
/// diagonalizes rho (checked within 1e-10).
double fluctuation(const DensityMatrix& rho, const ComplexMatrix& basis,
                   const RealVector& probabilities, const ComplexMatrix& a);

/// |Tr[(tau - rho) A]|^2.
double distinguishability(const DensityMatrix& tau, const DensityMatrix& rho, const ComplexMatrix& a);

/// Outcome of an entropy evaluation with the regularization disclosure.
struct EntropyValue {
  double value = 0.0;
  bool regularized = false;
};

/// S(sigma||rho) = Tr sigma ln sigma - Tr sigma ln rho, in nats. rho is
/// regularized at `epsilon`; weight of sigma outside the support of rho above
/// 1e-8 is rejected with SupportError.
EntropyValue umegaki(const DensityMatrix& sigma, const DensityMatrix& rho,
                     double epsilon = states::kDefaultRegularization);

/// Belavkin-Staszewski relative entropy through one of three routes:
///   1: Tr[sigma ln(sigma^{1/2} rho^{-1} sigma^{1/2})]
///   2: Tr[sigma ln(rho^{-1} sigma)] via the similarity
///      ln(rho^{-1} sigma) = rho^{-1/2} ln(X) rho^{1/2}, X = rho^{-1/2} sigma rho^{-1/2},
///      evaluated as Tr[(rho^{1/2} sigma rho^{-1/2}) ln X]
///   3: Tr[rho X ln X]
/// Eigenvalues of X (or of the form-1 operator) below 1e-14 are dropped
/// (0 ln 0 = 0). When `allow_regularization` is false a singular rho throws.
EntropyValue bs_entropy(const DensityMatrix& sigma, const DensityMatrix& rho, int form,
                        double epsilon = states::kDefaultRegularization,
                        bool allow_regularization = true);

/// J_rho^alpha(X) = rho^alpha X rho^alpha. Negative alpha needs rho > 0.
ComplexMatrix rescale_map(const DensityMatrix& rho, double alpha, const ComplexMatrix& x);
ComplexMatrix rescale_map(const ComplexMatrix& rho_power, const ComplexMatrix& x);

/// J_{rho_block}^{-1/2}(sigma_block) with rho_block regularized.
FormalObservable formal_observable(const DensityMatrix& rho_block, const BlockOperand& sigma_block,
                                   double epsilon = states::kDefaultRegularization);

/// Petz recovery of the partial trace onto block k:
/// R(sigma) = rho_B^{1/2} [ (rho_{B_k}^{-1/2} sigma rho_{B_k}^{-1/2}) (x) I ] rho_B^{1/2}.
ComplexMatrix petz_recovery(const DensityMatrix& rho, const BlockPartition& partition, int block,
                            const BlockOperand& sigma_block,
                            double epsilon = states::kDefaultRegularization);

/// |S_BS(sigma || rho_{B_k}) - S_BS(R(sigma) || rho_B)|.
double pullup_identity_residual(const DensityMatrix& rho, const BlockPartition& partition,
                                int block, const DensityMatrix& sigma_block,
                                double epsilon = states::kDefaultRegularization);

/// (1/C) sum_k J_{rho_{B_k}}^{-1/2}(sigma copy on B_k), embedded on the full
/// lattice. Rejects rho whose translation defect exceeds 1e-8.
FormalObservable average_formal_observable(const DensityMatrix& rho, const BlockPartition& partition,
                                           const BlockOperand& sigma_on_block,
                                           double epsilon = states::kDefaultRegularization);

/// ||T^shift X T^-shift - X||_inf for a full-lattice operator.
double translation_defect(const ComplexMatrix& x, const LatticeSpec& lattice, int shift = 1);

struct VarianceDecomposition {
  double total = 0.0;
  double local = 0.0;
  double cross = 0.0;
  /// V(rho, O^{B_1}) of the single block-1 copy.
  double block_variance = 0.0;
};

/// Single-block and two-block marginals of a state on a block partition.
/// Pair (k, l), k < l, is ordered with block k's sites first.
class BlockMarginals {
 public:
  BlockMarginals() = default;
  BlockMarginals(int block_count, std::vector<ComplexMatrix> singles,
                 std::vector<ComplexMatrix> pairs);

  static BlockMarginals from_state(const DensityMatrix& rho, const BlockPartition& partition);
  /// Build from the block-0 marginal and the pair marginals (0, d), d = 1..C-1,
  /// of a translation-invariant state.
  static BlockMarginals translation_invariant(int block_count, const ComplexMatrix& single,
                                              const std::vector<ComplexMatrix>& pairs_from_zero);

  int block_count() const noexcept { return block_count_; }
  const ComplexMatrix& single(int k) const;
  const ComplexMatrix& pair(int k, int l) const;

 private:
  int block_count_ = 0;
  std::vector<ComplexMatrix> singles_;
  std::vector<ComplexMatrix> pairs_;
};

/// Local and cross pieces of V(rho, (1/C) sum_k A_k) from the marginals.
/// `block_ops[k]` acts on block k in block-local coordinates. `total` is
/// set to local + cross; callers supply an independent total where needed.
VarianceDecomposition variance_from_marginals(const BlockMarginals& marginals,
                                              const std::vector<ComplexMatrix>& block_ops);

/// Decomposition of V(rho, O^B) for O^B the average of translational copies
/// of `block_op` (acting on block 0). `total` is evaluated directly on the
/// embedded full-lattice observable; local/cross come from the marginals.
VarianceDecomposition variance_decomposition(const DensityMatrix& rho, const BlockPartition& partition,
                                             const ComplexMatrix& block_op);

/// M^(m) = Tr[rho (O - I)^m] for a Hermitian O.
double moment(const DensityMatrix& rho, const ComplexMatrix& observable, int m);
double moment(const DensityMatrix& rho, const FormalObservable& observable, int m);

struct SeriesResidual {
  double exact = 0.0;
  double truncated = 0.0;
  double residual = 0.0;
  bool converged = false;
  /// ||O - I||_2.
  double hs_distance = 0.0;
};

/// Exact Tr[rho O ln O] against 0.5 M^(2) + sum_{n=3}^{n_max} (-1)^n M^(n) / ((n-1) n).
SeriesResidual bs_series_residual(const DensityMatrix& rho, const ComplexMatrix& observable, int n_max);

/// I(A:C) = S(rho_AC || rho_A (x) rho_C) for the bipartition dims_a x dims_c,
/// evaluated as S(rho_A) + S(rho_C) - S(rho_AC).
double mutual_information(const DensityMatrix& joint, Index dim_a, Index dim_c);
/// Von Neumann entropy in nats.
double von_neumann_entropy(const ComplexMatrix& rho);

/// Every divergence, norm and slack for sigma (density or transition) vs rho.
/// The pull-up residual is left empty; it needs the global state.
DivergenceReport divergence_report(const BlockOperand& sigma, const DensityMatrix& rho,
                                   double epsilon = states::kDefaultRegularization);

}  // namespace divergences
}  // namespace subeth
