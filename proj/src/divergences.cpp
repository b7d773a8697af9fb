#include "subeth/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace subeth {

double DivergenceReport::min_slack() const {
  double m = hoelder_slack;
  if (pinsker_slack) m = std::min(m, *pinsker_slack);
  if (bs_vs_umegaki_slack) m = std::min(m, *bs_vs_umegaki_slack);
  return m;
}

double DivergenceReport::max_form_disagreement() const {
  if (!bs_form1 || !bs_form2 || !bs_form3) return 0.0;
  return std::max(std::abs(*bs_form1 - *bs_form2), std::abs(*bs_form1 - *bs_form3));
}

namespace divergences {

namespace {

// Eigenvalues below this (relative to max(1, largest)) are treated as zero in
// x ln x type traces.
constexpr double kZeroEigen = 1e-14;

// Trace of a product without forming it: Tr(A B).
Complex trace_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a.transpose().cwiseProduct(b)).sum();
}

void require_match(const ComplexMatrix& a, const ComplexMatrix& b, std::string_view what) {
  linalg::require_square(a, what);
  linalg::require_same_shape(a, b, what);
}

// Regularized rho (when permitted) plus its eigensystem.
struct PreparedReference {
  DensityMatrix rho;
  SpectralDecomposition eig;
  bool regularized = false;
};

PreparedReference prepare_reference(const DensityMatrix& rho, double epsilon, bool allow) {
  auto reg = states::regularize(rho, epsilon);
  if (reg.clamped && !allow) {
    std::ostringstream os;
    os << "reference state is singular (min eigenvalue " << rho.min_eigenvalue()
       << ") and regularization is disabled";
    throw DomainError(os.str(), rho.min_eigenvalue());
  }
  SpectralDecomposition eig = linalg::hermitian_eig(reg.state.matrix());
  return {std::move(reg.state), std::move(eig), reg.clamped};
}

ComplexMatrix spectral_power(const SpectralDecomposition& eig, double p) {
  RealVector v(eig.dim());
  for (Index i = 0; i < eig.dim(); ++i) v(i) = std::pow(eig.eigenvalues(i), p);
  return eig.reconstruct(v);
}

double x_log_x(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

const ComplexMatrix& operand_matrix(const BlockOperand& op) {
  return std::visit(
      [](const auto& s) -> const ComplexMatrix& {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, DensityMatrix>) {
          return s.matrix();
        } else {
          return s.matrix;
        }
      },
      op);
}

bool operand_is_density(const BlockOperand& op) { return std::holds_alternative<DensityMatrix>(op); }

std::string operand_label(const BlockOperand& op) {
  if (const auto* t = std::get_if<TransitionMatrix>(&op)) {
    return "transition(" + std::to_string(t->ket_index) + "," + std::to_string(t->bra_index) + ")";
  }
  return "state";
}

}  // namespace

double quantum_variance(const ComplexMatrix& rho, const ComplexMatrix& a) {
  require_match(rho, a, "quantum_variance");
  const ComplexMatrix rho_a = rho * a;
  const double second = trace_product(rho_a, a.adjoint()).real();
  const double first = std::norm(rho_a.trace());
  return second - first;
}

double quantum_variance(const DensityMatrix& rho, const ComplexMatrix& a) {
  return quantum_variance(rho.matrix(), a);
}

double fluctuation(const DensityMatrix& rho, const ComplexMatrix& basis,
                   const RealVector& probabilities, const ComplexMatrix& a) {
  require_match(rho.matrix(), a, "fluctuation");
  if (basis.rows() != rho.dim() || basis.cols() != probabilities.size()) {
    throw DimensionError("fluctuation: basis does not match the state");
  }
  const ComplexMatrix rebuilt = basis * probabilities.asDiagonal() * basis.adjoint();
  const double defect = linalg::inf_norm(rebuilt - rho.matrix());
  if (defect > hermitian_tolerance(rho.dim())) {
    std::ostringstream os;
    os << "fluctuation: supplied basis does not diagonalize the state, defect " << defect;
    throw DomainError(os.str(), defect);
  }
  double acc = 0.0;
  for (Index j = 0; j < basis.cols(); ++j) {
    const Complex ev = basis.col(j).dot(a * basis.col(j));
    acc += probabilities(j) * std::norm(ev);
  }
  return acc - std::norm(trace_product(rho.matrix(), a));
}

double distinguishability(const DensityMatrix& tau, const DensityMatrix& rho, const ComplexMatrix& a) {
  require_match(tau.matrix(), rho.matrix(), "distinguishability");
  require_match(tau.matrix(), a, "distinguishability");
  return std::norm(trace_product(tau.matrix() - rho.matrix(), a));
}

EntropyValue umegaki(const DensityMatrix& sigma, const DensityMatrix& rho, double epsilon) {
  require_match(sigma.matrix(), rho.matrix(), "umegaki");
  const SpectralDecomposition rho_eig = linalg::hermitian_eig(rho.matrix());
  const auto reg = states::regularize(rho, epsilon);

  // Weight of sigma on the (near-)kernel of rho.
  double leaked = 0.0;
  for (Index k = 0; k < rho_eig.dim(); ++k) {
    if (rho_eig.eigenvalues(k) < epsilon) {
      const auto v = rho_eig.eigenvectors.col(k);
      leaked += v.dot(sigma.matrix() * v).real();
    }
  }
  if (leaked > 1e-8) {
    std::ostringstream os;
    os << "umegaki: sigma has weight " << leaked << " outside the support of rho";
    throw SupportError(os.str(), leaked);
  }

  const SpectralDecomposition ref = linalg::hermitian_eig(reg.state.matrix());
  double cross = 0.0;
  for (Index k = 0; k < ref.dim(); ++k) {
    const auto v = ref.eigenvectors.col(k);
    cross += v.dot(sigma.matrix() * v).real() * std::log(ref.eigenvalues(k));
  }
  const RealVector s = linalg::hermitian_eig(sigma.matrix()).eigenvalues;
  double self = 0.0;
  for (Index k = 0; k < s.size(); ++k) self += x_log_x(s(k));
  return {self - cross, reg.clamped};
}

EntropyValue bs_entropy(const DensityMatrix& sigma, const DensityMatrix& rho, int form,
                        double epsilon, bool allow_regularization) {
  require_match(sigma.matrix(), rho.matrix(), "bs_entropy");
  if (form < 1 || form > 3) throw DomainError("bs_entropy: form must be 1, 2 or 3", form);
  const PreparedReference ref = prepare_reference(rho, epsilon, allow_regularization);
  const ComplexMatrix& s = sigma.matrix();

  if (form == 1) {
    const SpectralDecomposition s_eig = linalg::hermitian_eig(s);
    RealVector root(s_eig.dim());
    for (Index i = 0; i < s_eig.dim(); ++i) root(i) = std::sqrt(std::max(s_eig.eigenvalues(i), 0.0));
    const ComplexMatrix s_half = s_eig.reconstruct(root);
    ComplexMatrix y = s_half * spectral_power(ref.eig, -1.0) * s_half;
    y = 0.5 * (y + y.adjoint()).eval();
    const SpectralDecomposition y_eig = linalg::hermitian_eig(y);
    const double cut = kZeroEigen * std::max(1.0, y_eig.eigenvalues.maxCoeff());
    double acc = 0.0;
    for (Index k = 0; k < y_eig.dim(); ++k) {
      if (y_eig.eigenvalues(k) <= cut) continue;
      const auto w = y_eig.eigenvectors.col(k);
      acc += w.dot(s * w).real() * std::log(y_eig.eigenvalues(k));
    }
    return {acc, ref.regularized};
  }

  const ComplexMatrix inv_half = spectral_power(ref.eig, -0.5);
  ComplexMatrix x = inv_half * s * inv_half;
  x = 0.5 * (x + x.adjoint()).eval();
  const SpectralDecomposition x_eig = linalg::hermitian_eig(x);
  const double cut = kZeroEigen * std::max(1.0, x_eig.eigenvalues.maxCoeff());

  if (form == 2) {
    const ComplexMatrix similar = spectral_power(ref.eig, 0.5) * s * inv_half;
    RealVector logs(x_eig.dim());
    for (Index k = 0; k < x_eig.dim(); ++k) {
      logs(k) = x_eig.eigenvalues(k) > cut ? std::log(x_eig.eigenvalues(k)) : 0.0;
    }
    return {trace_product(similar, x_eig.reconstruct(logs)).real(), ref.regularized};
  }

  RealVector xlx(x_eig.dim());
  for (Index k = 0; k < x_eig.dim(); ++k) {
    xlx(k) = x_eig.eigenvalues(k) > cut ? x_log_x(x_eig.eigenvalues(k)) : 0.0;
  }
  return {trace_product(ref.rho.matrix(), x_eig.reconstruct(xlx)).real(), ref.regularized};
}

ComplexMatrix rescale_map(const ComplexMatrix& rho_power, const ComplexMatrix& x) {
  require_match(rho_power, x, "rescale_map");
  return rho_power * x * rho_power;
}

ComplexMatrix rescale_map(const DensityMatrix& rho, double alpha, const ComplexMatrix& x) {
  require_match(rho.matrix(), x, "rescale_map");
  if (alpha == 0.0) return x;
  if (alpha < 0.0 && rho.min_eigenvalue() <= 0.0) {
    throw DomainError("rescale_map: negative power of a singular state", rho.min_eigenvalue());
  }
  return rescale_map(linalg::matrix_power(rho.matrix(), alpha), x);
}

FormalObservable formal_observable(const DensityMatrix& rho_block, const BlockOperand& sigma_block,
                                   double epsilon) {
  const ComplexMatrix& s = operand_matrix(sigma_block);
  require_match(rho_block.matrix(), s, "formal_observable");
  const auto reg = states::regularize(rho_block, epsilon);
  FormalObservable out;
  out.matrix = rescale_map(reg.state, -0.5, s);
  out.kind = operand_is_density(sigma_block) ? FormalObservable::Kind::kDiagonal
                                             : FormalObservable::Kind::kOffDiagonal;
  out.block = 0;
  out.source = operand_label(sigma_block);
  out.regularized = reg.clamped;
  return out;
}

ComplexMatrix petz_recovery(const DensityMatrix& rho, const BlockPartition& partition, int block,
                            const BlockOperand& sigma_block, double epsilon) {
  const LatticeSpec& lattice = partition.lattice();
  if (rho.dim() != lattice.full_dim()) throw DimensionError("petz_recovery: state dim does not match lattice");
  const ComplexMatrix& s = operand_matrix(sigma_block);
  if (s.rows() != partition.block_dim() || s.cols() != partition.block_dim()) {
    throw DimensionError("petz_recovery: block operand has wrong dimension");
  }
  const auto global = states::regularize(rho, epsilon);
  const auto local = states::regularize(states::reduce(global.state, partition, block), epsilon);
  const ComplexMatrix inner = rescale_map(local.state, -0.5, s);
  const auto dims = lattice.site_dims();
  const ComplexMatrix lifted = linalg::embed(inner, dims, partition.sites(block));
  return rescale_map(global.state, 0.5, lifted);
}

double pullup_identity_residual(const DensityMatrix& rho, const BlockPartition& partition, int block,
                                const DensityMatrix& sigma_block, double epsilon) {
  const auto global = states::regularize(rho, epsilon);
  const auto local = states::regularize(states::reduce(global.state, partition, block), epsilon);
  const double block_side = bs_entropy(sigma_block, local.state, 3, epsilon).value;
  const ComplexMatrix recovered = petz_recovery(global.state, partition, block, sigma_block, epsilon);
  const DensityMatrix lifted(recovered);
  const double global_side = bs_entropy(lifted, global.state, 2, epsilon).value;
  return std::abs(block_side - global_side);
}

double translation_defect(const ComplexMatrix& x, const LatticeSpec& lattice, int shift) {
  return linalg::inf_norm(linalg::translate(x, lattice, shift) - x);
}

FormalObservable average_formal_observable(const DensityMatrix& rho, const BlockPartition& partition,
                                           const BlockOperand& sigma_on_block, double epsilon) {
  const LatticeSpec& lattice = partition.lattice();
  if (rho.dim() != lattice.full_dim()) {
    throw DimensionError("average_formal_observable: state dim does not match lattice");
  }
  const ComplexMatrix& s = operand_matrix(sigma_on_block);
  if (s.rows() != partition.block_dim() || s.cols() != partition.block_dim()) {
    throw DimensionError("average_formal_observable: block operand has wrong dimension");
  }
  const double defect = translation_defect(rho.matrix(), lattice, partition.block_size());
  if (defect > 1e-8) {
    std::ostringstream os;
    os << "average_formal_observable: state is not translation invariant, defect " << defect;
    throw DomainError(os.str(), defect);
  }
  const auto global = states::regularize(rho, epsilon);
  const auto dims = lattice.site_dims();
  const int c = partition.block_count();
  FormalObservable out;
  out.matrix = ComplexMatrix::Zero(rho.dim(), rho.dim());
  out.regularized = global.clamped;
  for (int k = 0; k < c; ++k) {
    const auto local = states::regularize(states::reduce(global.state, partition, k), epsilon);
    out.regularized = out.regularized || local.clamped;
    out.matrix += linalg::embed(rescale_map(local.state, -0.5, s), dims, partition.sites(k));
  }
  out.matrix /= static_cast<double>(c);
  out.kind = operand_is_density(sigma_on_block) ? FormalObservable::Kind::kDiagonal
                                                : FormalObservable::Kind::kOffDiagonal;
  out.block = -1;
  out.source = operand_label(sigma_on_block);
  return out;
}

BlockMarginals::BlockMarginals(int block_count, std::vector<ComplexMatrix> singles,
                               std::vector<ComplexMatrix> pairs)
    : block_count_(block_count), singles_(std::move(singles)), pairs_(std::move(pairs)) {
  const auto c = static_cast<std::size_t>(block_count);
  if (singles_.size() != c || pairs_.size() != c * c) {
    throw DimensionError("BlockMarginals: wrong number of marginals");
  }
}

BlockMarginals BlockMarginals::from_state(const DensityMatrix& rho, const BlockPartition& partition) {
  const int c = partition.block_count();
  const auto dims = partition.lattice().site_dims();
  std::vector<ComplexMatrix> singles;
  std::vector<ComplexMatrix> pairs(static_cast<std::size_t>(c * c));
  for (int k = 0; k < c; ++k) singles.push_back(linalg::partial_trace(rho.matrix(), dims, partition.sites(k)));
  for (int k = 0; k < c; ++k) {
    for (int l = k + 1; l < c; ++l) {
      pairs[static_cast<std::size_t>(k * c + l)] =
          linalg::partial_trace(rho.matrix(), dims, partition.pair_sites(k, l));
    }
  }
  return BlockMarginals(c, std::move(singles), std::move(pairs));
}

BlockMarginals BlockMarginals::translation_invariant(int block_count, const ComplexMatrix& single,
                                                     const std::vector<ComplexMatrix>& pairs_from_zero) {
  const int c = block_count;
  if (static_cast<int>(pairs_from_zero.size()) != c - 1) {
    throw DimensionError("BlockMarginals: need C-1 pair marginals");
  }
  std::vector<ComplexMatrix> singles(static_cast<std::size_t>(c), single);
  std::vector<ComplexMatrix> pairs(static_cast<std::size_t>(c * c));
  for (int k = 0; k < c; ++k) {
    for (int l = k + 1; l < c; ++l) {
      pairs[static_cast<std::size_t>(k * c + l)] = pairs_from_zero[static_cast<std::size_t>(l - k - 1)];
    }
  }
  return BlockMarginals(c, std::move(singles), std::move(pairs));
}

const ComplexMatrix& BlockMarginals::single(int k) const {
  if (k < 0 || k >= block_count_) throw DimensionError("BlockMarginals: block out of range");
  return singles_[static_cast<std::size_t>(k)];
}

const ComplexMatrix& BlockMarginals::pair(int k, int l) const {
  if (k < 0 || l <= k || l >= block_count_) throw DimensionError("BlockMarginals: pair must satisfy 0 <= k < l < C");
  return pairs_[static_cast<std::size_t>(k * block_count_ + l)];
}

VarianceDecomposition variance_from_marginals(const BlockMarginals& marginals,
                                              const std::vector<ComplexMatrix>& block_ops) {
  const int c = marginals.block_count();
  if (static_cast<int>(block_ops.size()) != c) throw DimensionError("variance_from_marginals: need one operator per block");
  const double c2 = static_cast<double>(c) * static_cast<double>(c);
  std::vector<Complex> means(static_cast<std::size_t>(c));
  VarianceDecomposition out;
  double local_sum = 0.0;
  for (int k = 0; k < c; ++k) {
    const auto& a = block_ops[static_cast<std::size_t>(k)];
    means[static_cast<std::size_t>(k)] = trace_product(marginals.single(k), a);
    local_sum += quantum_variance(marginals.single(k), a);
  }
  double cross_sum = 0.0;
  for (int k = 0; k < c; ++k) {
    for (int l = k + 1; l < c; ++l) {
      const ComplexMatrix joint =
          linalg::kron(block_ops[static_cast<std::size_t>(k)], block_ops[static_cast<std::size_t>(l)].adjoint());
      const Complex term = trace_product(marginals.pair(k, l), joint) -
                           means[static_cast<std::size_t>(k)] * std::conj(means[static_cast<std::size_t>(l)]);
      // The (l, k) term is the complex conjugate of the (k, l) term.
      cross_sum += 2.0 * term.real();
    }
  }
  out.local = local_sum / c2;
  out.cross = cross_sum / c2;
  out.total = out.local + out.cross;
  out.block_variance = quantum_variance(marginals.single(0), block_ops.front());
  return out;
}

VarianceDecomposition variance_decomposition(const DensityMatrix& rho, const BlockPartition& partition,
                                             const ComplexMatrix& block_op) {
  const LatticeSpec& lattice = partition.lattice();
  if (rho.dim() != lattice.full_dim()) throw DimensionError("variance_decomposition: state dim does not match lattice");
  if (block_op.rows() != partition.block_dim() || block_op.cols() != partition.block_dim()) {
    throw DimensionError("variance_decomposition: block operator has wrong dimension");
  }
  const int c = partition.block_count();
  const auto dims = lattice.site_dims();
  const ComplexMatrix first = linalg::embed(block_op, dims, partition.sites(0));
  ComplexMatrix averaged = first;
  for (int k = 1; k < c; ++k) averaged += linalg::translate(first, lattice, k * partition.block_size());
  averaged /= static_cast<double>(c);

  const auto marginals = BlockMarginals::from_state(rho, partition);
  VarianceDecomposition out =
      variance_from_marginals(marginals, std::vector<ComplexMatrix>(static_cast<std::size_t>(c), block_op));
  out.total = quantum_variance(rho, averaged);
  return out;
}

double moment(const DensityMatrix& rho, const ComplexMatrix& observable, int m) {
  if (m < 1) throw DomainError("moment: order must be at least 1", m);
  require_match(rho.matrix(), observable, "moment");
  const double defect = linalg::hermiticity_defect(observable);
  if (defect > hermitian_tolerance(observable.rows()) * std::max(1.0, linalg::inf_norm(observable))) {
    throw DomainError("moment: observable is not Hermitian", defect);
  }
  const ComplexMatrix shifted = observable - ComplexMatrix::Identity(observable.rows(), observable.cols());
  ComplexMatrix power = shifted;
  for (int i = 1; i < m; ++i) power = power * shifted;
  return trace_product(rho.matrix(), power).real();
}

double moment(const DensityMatrix& rho, const FormalObservable& observable, int m) {
  if (observable.kind != FormalObservable::Kind::kDiagonal) {
    throw DomainError("moment: needs a diagonal-type observable", m);
  }
  return moment(rho, observable.matrix, m);
}

SeriesResidual bs_series_residual(const DensityMatrix& rho, const ComplexMatrix& observable, int n_max) {
  require_match(rho.matrix(), observable, "bs_series_residual");
  const Index n = observable.rows();
  SeriesResidual out;
  out.hs_distance = linalg::schatten_norm(observable - ComplexMatrix::Identity(n, n), 2.0);
  out.converged = out.hs_distance <= 1.0;

  const double floor = -hermitian_tolerance(n);
  const ComplexMatrix o_log_o = linalg::matrix_function(
      observable, [](double x) { return x_log_x(x); }, [floor](double x) { return x >= floor; }, "x ln x");
  out.exact = trace_product(rho.matrix(), o_log_o).real();

  // Powers of Y = O - I accumulated once.
  const ComplexMatrix y = observable - ComplexMatrix::Identity(n, n);
  ComplexMatrix power = y * y;
  double acc = 0.5 * trace_product(rho.matrix(), power).real();
  for (int order = 3; order <= n_max; ++order) {
    power = power * y;
    const double sign = (order % 2 == 0) ? 1.0 : -1.0;
    acc += sign * trace_product(rho.matrix(), power).real() / (static_cast<double>(order - 1) * order);
  }
  out.truncated = acc;
  out.residual = std::abs(out.exact - out.truncated);
  return out;
}

double von_neumann_entropy(const ComplexMatrix& rho) {
  const RealVector ev = linalg::hermitian_eig(rho).eigenvalues;
  double s = 0.0;
  for (Index i = 0; i < ev.size(); ++i) s -= x_log_x(ev(i));
  return s;
}

double mutual_information(const DensityMatrix& joint, Index dim_a, Index dim_c) {
  if (dim_a < 1 || dim_c < 1 || dim_a * dim_c != joint.dim()) {
    throw DimensionError("mutual_information: split dims do not multiply to the state dim");
  }
  const std::vector<int> dims{static_cast<int>(dim_a), static_cast<int>(dim_c)};
  const std::vector<int> keep_a{0};
  const std::vector<int> keep_c{1};
  const ComplexMatrix rho_a = linalg::partial_trace(joint.matrix(), dims, keep_a);
  const ComplexMatrix rho_c = linalg::partial_trace(joint.matrix(), dims, keep_c);
  return von_neumann_entropy(rho_a) + von_neumann_entropy(rho_c) - von_neumann_entropy(joint.matrix());
}

DivergenceReport divergence_report(const BlockOperand& sigma, const DensityMatrix& rho, double epsilon) {
  const ComplexMatrix& s = operand_matrix(sigma);
  require_match(rho.matrix(), s, "divergence_report");
  DivergenceReport r;
  const auto reg = states::regularize(rho, epsilon);
  r.regularization_flag = reg.clamped;
  const FormalObservable o = formal_observable(rho, sigma, epsilon);
  r.variance = quantum_variance(reg.state, o.matrix);

  if (const auto* dm = std::get_if<DensityMatrix>(&sigma)) {
    r.trace_norm = linalg::schatten_norm(dm->matrix() - rho.matrix(), 1.0);
    const auto s_u = umegaki(*dm, rho, epsilon);
    const auto f1 = bs_entropy(*dm, rho, 1, epsilon);
    const auto f2 = bs_entropy(*dm, rho, 2, epsilon);
    const auto f3 = bs_entropy(*dm, rho, 3, epsilon);
    r.umegaki = s_u.value;
    r.bs_form1 = f1.value;
    r.bs_form2 = f2.value;
    r.bs_form3 = f3.value;
    r.pinsker_slack = s_u.value - 0.5 * r.trace_norm * r.trace_norm;
    r.bs_vs_umegaki_slack = f1.value - s_u.value;
  } else {
    r.trace_norm = linalg::schatten_norm(s, 1.0);
  }
  r.trace_distance = 0.5 * r.trace_norm;
  r.hoelder_slack = r.variance - r.trace_norm * r.trace_norm;
  return r;
}

}  // namespace divergences
}  // namespace subeth
