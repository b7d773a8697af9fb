#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "subeth/core.hpp"
#include "subeth/divergences.hpp"
#include "subeth/ensembles.hpp"
#include "subeth/models.hpp"
#include "subeth/states.hpp"

namespace subeth {

/// Which eigenstates and shells the scans look at.
struct SelectionPolicy {
  /// Central fraction of the spectrum (by index) scanned.
  double window_fraction = 0.1;
  int max_states = 50;
  /// Adaptive microcanonical shells hold max(shell_min_states, shell_fraction * dim) states.
  int shell_min_states = 20;
  double shell_fraction = 0.005;

  bool operator==(const SelectionPolicy&) const = default;
};

struct ScanSize {
  int sites = 0;
  int block_size = 0;

  bool operator==(const ScanSize&) const = default;
};

namespace record_status {
inline constexpr const char* kOk = "ok";
inline constexpr const char* kDegenerate = "degenerate_partition";
inline constexpr const char* kNondivisible = "skipped_nondivisible";
}  // namespace record_status

/// One eigenstate (diagonal) or eigenpair (off-diagonal) of a scan. Numeric
/// fields are meaningful only when status == "ok".
struct ScalingRecord {
  int sites = 0;
  int block_size = 0;
  int block_count = 0;
  Index i = -1;
  /// -1 for diagonal records.
  Index j = -1;
  double energy_i = 0.0;
  double energy_j = 0.0;
  double beta = 0.0;
  std::string status = record_status::kOk;
  /// 0.5 ||sigma - rho_B1||_1 (diagonal).
  double trace_distance = 0.0;
  /// ||sigma - rho_B1||_1 (diagonal) or ||sigma^{ij}||_1 (off-diagonal).
  double trace_norm = 0.0;
  double bs_entropy = 0.0;
  double variance_total = 0.0;
  double variance_local = 0.0;
  double variance_cross = 0.0;
  /// V(rho_B1, J^{-1/2}(sigma)).
  double variance_block = 0.0;
  /// variance_total / variance_block.
  double variance_ratio = 0.0;
  /// 0.5 ||sigma_{B_1} - sigma_{B_2}||_1 of the same eigenstate (diagonal, C >= 2).
  double block_spread = 0.0;
  bool regularized = false;
  double wall_time = 0.0;
};

struct DecayRecord {
  int block_k = 0;
  int block_l = 0;
  int distance = 0;
  double corr_norm = 0.0;
  double mutual_info = 0.0;
};

/// Least-squares fits of ln(corr_norm) against d (exponential) and ln d
/// (algebraic), on the per-distance mean.
struct DecayFit {
  /// "exponential", "algebraic" or "none" (fewer than two resolvable distances).
  std::string better_model = "none";
  int points = 0;
  /// ln c = a - d / xi; xi is +inf when the fitted slope is >= 0.
  double xi = 0.0;
  double exp_residual = 0.0;
  /// ln c = a - gamma ln d.
  double gamma = 0.0;
  double alg_residual = 0.0;
};

struct DecayProbe {
  std::vector<DecayRecord> records;
  DecayFit fit;
};

struct ChebyshevRow {
  std::string form;
  std::string observable;
  double epsilon = 0.0;
  double empirical = 0.0;
  double bound = 0.0;
  bool violated = false;
};

struct TypicalityReport {
  double v_dg = 0.0;
  double v_off = 0.0;
  /// sum_{alpha,beta} p'_alpha V(rho, O^B(|alpha><beta|)).
  double basis_side = 0.0;
  /// Same sum weighted by p'_beta (reported only).
  double basis_side_swapped = 0.0;
  /// sum_{a,b} p_a V(rho, O^B_{ab}) in the eigenbasis of rho.
  double global_side = 0.0;
  double identity_residual = 0.0;
  double global_residual = 0.0;
  double local_combination_residual = 0.0;
  double orthogonality_residual = 0.0;
  double conversion_residual_diag = 0.0;
  double conversion_residual_off = 0.0;
  bool regularized = false;
};

struct EquivalenceRecord {
  int sites = 0;
  int block_size = 0;
  double shell_upper = 0.0;
  double shell_width = 0.0;
  int shell_states = 0;
  double mean_energy = 0.0;
  double beta = 0.0;
  /// ||rho^mc_B1 - rho^c_B1||_1.
  double lhs = 0.0;
  double lhs_half = 0.0;
  /// (1/D) sum_i ||sigma_bar^i - rho^c_B1||_1.
  double convexity_middle = 0.0;
  /// (1/D) sum_i V(rho^c, O^B_i)^{1/2}.
  double rhs = 0.0;
  double margin = 0.0;
  bool regularized = false;
};

namespace experiments {

/// Indices of the central window: count = max(1, min(max_states, floor(fraction * dim))).
std::vector<Index> select_window(Index dim, const SelectionPolicy& policy);

/// Runs fn(0..count-1) on `threads` workers (0 = hardware concurrency).
/// Exceptions are rethrown on the caller's thread.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

/// Diagonalized chain on a block partition, with the block-0 and (0, d) pair
/// reductions of every eigenvector cached so that the marginals of any
/// energy-diagonal translation-invariant state are cheap weighted sums.
class SpectralContext {
 public:
  SpectralContext(const LatticeSpec& lattice, const HamiltonianSpec& model, int block_size);
  /// From an explicit Hamiltonian on `lattice`.
  SpectralContext(const LatticeSpec& lattice, const ComplexMatrix& h, int block_size);

  const LatticeSpec& lattice() const noexcept { return lattice_; }
  const BlockPartition& partition() const noexcept { return partition_; }
  const SpectralDecomposition& eig() const noexcept { return eig_; }
  Index dim() const noexcept { return eig_.dim(); }
  int block_count() const noexcept { return partition_.block_count(); }

  /// Block-0 reduction of eigenvector n.
  const ComplexMatrix& single(Index n) const;
  /// Reduction of eigenvector n onto blocks (0, d), block 0 first.
  const ComplexMatrix& pair(Index n, int d) const;

  /// sum_n w_n single(n).
  ComplexMatrix block_marginal(const RealVector& weights) const;
  /// Marginals of sum_n w_n |n><n|; valid when that state is invariant
  /// under block translations.
  divergences::BlockMarginals marginals(const RealVector& weights) const;

  /// V(rho, (1/C) sum_k op on block k) for rho = sum_n w_n |n><n|, evaluated
  /// on full-lattice vectors.
  double direct_variance(const RealVector& weights, const ComplexMatrix& block_op) const;

  /// Reduction of |E_ket><E_bra| onto block k.
  ComplexMatrix reduce_pair(Index ket, Index bra, int block) const;

 private:
  LatticeSpec lattice_;
  BlockPartition partition_;
  SpectralDecomposition eig_;
  std::vector<linalg::SiteSplit> block_splits_;
  std::vector<ComplexMatrix> singles_;
  /// (C - 1) entries per eigenvector.
  std::vector<ComplexMatrix> pairs_;
};

/// Diagonal records for the selected eigenstates of one context, sorted by i.
std::vector<ScalingRecord> eigenstate_scan(const SpectralContext& ctx, const SelectionPolicy& policy,
                                           int threads = 1,
                                           double epsilon = states::kDefaultRegularization);
/// Off-diagonal records for consecutive pairs (i, i+1) inside the window.
std::vector<ScalingRecord> eigenpair_scan(const SpectralContext& ctx, const SelectionPolicy& policy,
                                          int threads = 1,
                                          double epsilon = states::kDefaultRegularization);

/// Grid drivers: sizes with N_A not dividing N yield a single
/// skipped_nondivisible record; N = N_A yields degenerate_partition records.
/// Output sorted by (N, i, j).
std::vector<ScalingRecord> subsystem_eth_scan(const std::vector<ScanSize>& sizes, const HamiltonianSpec& model,
                                              const SelectionPolicy& policy, int threads = 1);
std::vector<ScalingRecord> offdiag_scan(const std::vector<ScanSize>& sizes, const HamiltonianSpec& model,
                                        const SelectionPolicy& policy, int threads = 1);

/// One off-diagonal record; rejects i == j.
ScalingRecord offdiag_record(const SpectralContext& ctx, Index i, Index j,
                             double epsilon = states::kDefaultRegularization);

/// corr_norm = ||rho_{B_k B_l} - rho_{B_k} (x) rho_{B_l}||_1 for all k < l.
/// Needs C >= 3.
DecayProbe correlation_decay_probe(const DensityMatrix& rho, const BlockPartition& partition);
DecayProbe correlation_decay_probe(const divergences::BlockMarginals& marginals, const BlockPartition& partition);

DecayFit fit_decay(const std::vector<DecayRecord>& records);

/// P[|Tr(Pi^j A) - Tr(rho A)| >= eps] against Delta(rho, A) / eps^2, with
/// rho = sum_j p_j |v_j><v_j| given by its eigenbasis.
std::vector<ChebyshevRow> chebyshev_concentration(const DensityMatrix& rho, const ComplexMatrix& basis,
                                                  const RealVector& probabilities, const ComplexMatrix& a,
                                                  const std::vector<double>& epsilons,
                                                  const std::string& label = "A");

/// Unvalidated form for large states kept in eigen-form.
std::vector<ChebyshevRow> chebyshev_from_spectrum(const ComplexMatrix& basis, const RealVector& probabilities,
                                                  const ComplexMatrix& a, const std::vector<double>& epsilons,
                                                  const std::string& label);

/// Markov-type tail for the averaged formal observables:
/// X_i = sum_j V(rho_B1, J^{-1/2}(sigma_bar^{ij})), P[X >= eps^2] against
/// the basis-side aggregate / eps^2.
std::vector<ChebyshevRow> averaged_chebyshev(const DensityMatrix& rho, const BlockPartition& partition,
                                             const ComplexMatrix& basis, const RealVector& probabilities,
                                             const std::vector<double>& epsilons,
                                             double epsilon_reg = states::kDefaultRegularization);

/// Dual-path evaluation of <V_dg> + <V_off> for a block-translation-invariant
/// rho with eigenbasis (basis, probabilities). `seed` drives the random local
/// observable used by the conversion checks.
TypicalityReport typicality_balance(const DensityMatrix& rho, const BlockPartition& partition,
                                    const ComplexMatrix& basis, const RealVector& probabilities,
                                    std::uint64_t seed = 0,
                                    double epsilon = states::kDefaultRegularization);

/// Microcanonical shell of `shell` vs the canonical state at the shell mean energy.
EquivalenceRecord ensemble_equivalence(const SpectralContext& ctx, const EnergyShell& shell,
                                       double epsilon = states::kDefaultRegularization);
EquivalenceRecord ensemble_equivalence(const ComplexMatrix& h, const LatticeSpec& lattice, double upper,
                                       double delta, int block_size,
                                       double epsilon = states::kDefaultRegularization);

/// All divergences and slacks; with a global state the pull-up residual is
/// filled in as well.
DivergenceReport inequality_audit(const BlockOperand& sigma, const DensityMatrix& rho,
                                  double epsilon = states::kDefaultRegularization);
DivergenceReport inequality_audit(const BlockOperand& sigma, const DensityMatrix& global_rho,
                                  const BlockPartition& partition,
                                  double epsilon = states::kDefaultRegularization);

struct ScalingFit {
  double exponent = 0.0;
  double intercept = 0.0;
  /// 95% Student-t half-width of the exponent (inf with two points).
  double half_width = 0.0;
  int points = 0;
};

/// Least squares of ln(y) against ln(x).
ScalingFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

}  // namespace experiments
}  // namespace subeth
