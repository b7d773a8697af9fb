#include "subeth/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

namespace subeth::experiments {

namespace {

Complex trace_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a.transpose().cwiseProduct(b)).sum();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// V(sum_n w_n |v_n><v_n|, (1/C) sum_k op on split k) through A^dagger |v_n>.
double variance_eigenform(const ComplexMatrix& basis, const RealVector& weights,
                          const std::vector<linalg::SiteSplit>& splits, const ComplexMatrix& block_op) {
  const ComplexMatrix op_dag = block_op.adjoint();
  const double inv_c = 1.0 / static_cast<double>(splits.size());
  double second = 0.0;
  Complex mean = 0.0;
  ComplexVector y(basis.rows());
  for (Index n = 0; n < basis.cols(); ++n) {
    const double w = weights(n);
    if (w == 0.0) continue;
    const ComplexVector v = basis.col(n);
    y.setZero();
    for (const auto& split : splits) y += linalg::apply_local(op_dag, split, v);
    y *= inv_c;
    second += w * y.squaredNorm();
    mean += w * std::conj(v.dot(y));
  }
  return second - std::norm(mean);
}

std::vector<linalg::SiteSplit> make_block_splits(const BlockPartition& partition) {
  const auto dims = partition.lattice().site_dims();
  std::vector<linalg::SiteSplit> splits;
  for (int k = 0; k < partition.block_count(); ++k) splits.emplace_back(dims, partition.sites(k));
  return splits;
}

bool record_less(const ScalingRecord& a, const ScalingRecord& b) {
  if (a.sites != b.sites) return a.sites < b.sites;
  if (a.block_size != b.block_size) return a.block_size < b.block_size;
  if (a.i != b.i) return a.i < b.i;
  return a.j < b.j;
}

// Least squares y = a + b x; returns (a, b, sum of squared residuals).
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double ssr = 0.0;
  double sxx = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.sxx = sxx;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    f.ssr += r * r;
  }
  return f;
}

}  // namespace

std::vector<Index> select_window(Index dim, const SelectionPolicy& policy) {
  if (dim < 1) throw DimensionError("select_window: empty spectrum");
  const auto by_fraction = static_cast<Index>(std::floor(policy.window_fraction * static_cast<double>(dim)));
  const Index count = std::max<Index>(1, std::min<Index>(policy.max_states, by_fraction));
  const Index start = (dim - count) / 2;
  std::vector<Index> out(static_cast<std::size_t>(count));
  for (Index t = 0; t < count; ++t) out[static_cast<std::size_t>(t)] = start + t;
  return out;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

SpectralContext::SpectralContext(const LatticeSpec& lattice, const HamiltonianSpec& model, int block_size)
    : SpectralContext(lattice, models::build_hamiltonian(lattice, model), block_size) {}

SpectralContext::SpectralContext(const LatticeSpec& lattice, const ComplexMatrix& h, int block_size)
    : lattice_(lattice), partition_(lattice, block_size), eig_(linalg::hermitian_eig(h)) {
  if (eig_.dim() != lattice.full_dim()) throw DimensionError("SpectralContext: Hamiltonian does not match lattice");
  block_splits_ = make_block_splits(partition_);
  const int c = partition_.block_count();
  const auto dims = lattice_.site_dims();
  std::vector<linalg::SiteSplit> pair_splits;
  for (int d = 1; d < c; ++d) pair_splits.emplace_back(dims, partition_.pair_sites(0, d));

  const Index dim = eig_.dim();
  singles_.resize(static_cast<std::size_t>(dim));
  pairs_.resize(static_cast<std::size_t>(dim) * static_cast<std::size_t>(c - 1));
  for (Index n = 0; n < dim; ++n) {
    const ComplexVector v = eig_.eigenvectors.col(n);
    const ComplexMatrix g = block_splits_.front().gather(v);
    singles_[static_cast<std::size_t>(n)] = g * g.adjoint();
    for (int d = 1; d < c; ++d) {
      const ComplexMatrix gp = pair_splits[static_cast<std::size_t>(d - 1)].gather(v);
      pairs_[static_cast<std::size_t>(n) * static_cast<std::size_t>(c - 1) + static_cast<std::size_t>(d - 1)] =
          gp * gp.adjoint();
    }
  }
}

const ComplexMatrix& SpectralContext::single(Index n) const {
  if (n < 0 || n >= dim()) throw DimensionError("SpectralContext: eigenvector index out of range");
  return singles_[static_cast<std::size_t>(n)];
}

const ComplexMatrix& SpectralContext::pair(Index n, int d) const {
  const int c = block_count();
  if (n < 0 || n >= dim() || d < 1 || d >= c) throw DimensionError("SpectralContext: pair index out of range");
  return pairs_[static_cast<std::size_t>(n) * static_cast<std::size_t>(c - 1) + static_cast<std::size_t>(d - 1)];
}

ComplexMatrix SpectralContext::block_marginal(const RealVector& weights) const {
  if (weights.size() != dim()) throw DimensionError("block_marginal: one weight per eigenvector");
  const Index db = partition_.block_dim();
  ComplexMatrix out = ComplexMatrix::Zero(db, db);
  for (Index n = 0; n < dim(); ++n) {
    if (weights(n) != 0.0) out += weights(n) * singles_[static_cast<std::size_t>(n)];
  }
  return out;
}

divergences::BlockMarginals SpectralContext::marginals(const RealVector& weights) const {
  if (weights.size() != dim()) throw DimensionError("marginals: one weight per eigenvector");
  const int c = block_count();
  const Index dp = partition_.block_dim() * partition_.block_dim();
  std::vector<ComplexMatrix> pairs(static_cast<std::size_t>(c - 1), ComplexMatrix::Zero(dp, dp));
  for (Index n = 0; n < dim(); ++n) {
    if (weights(n) == 0.0) continue;
    for (int d = 1; d < c; ++d) pairs[static_cast<std::size_t>(d - 1)] += weights(n) * pair(n, d);
  }
  return divergences::BlockMarginals::translation_invariant(c, block_marginal(weights), pairs);
}

double SpectralContext::direct_variance(const RealVector& weights, const ComplexMatrix& block_op) const {
  if (weights.size() != dim()) throw DimensionError("direct_variance: one weight per eigenvector");
  return variance_eigenform(eig_.eigenvectors, weights, block_splits_, block_op);
}

ComplexMatrix SpectralContext::reduce_pair(Index ket, Index bra, int block) const {
  partition_.check_block(block);
  if (ket < 0 || bra < 0 || ket >= dim() || bra >= dim()) {
    throw DimensionError("reduce_pair: eigenvector index out of range");
  }
  const auto& split = block_splits_[static_cast<std::size_t>(block)];
  const ComplexMatrix gk = split.gather(eig_.eigenvectors.col(ket));
  const ComplexMatrix gb = split.gather(eig_.eigenvectors.col(bra));
  return gk * gb.adjoint();
}

namespace {

// Canonical reference at the energy `target`: weights, block marginal, marginals.
struct CanonicalReference {
  double beta = 0.0;
  RealVector weights;
  DensityMatrix block;
  divergences::BlockMarginals marginals;
};

CanonicalReference canonical_at(const SpectralContext& ctx, double target) {
  const double beta = ensembles::match_beta(ctx.eig().eigenvalues, target);
  RealVector w = ensembles::gibbs_weights(ctx.eig().eigenvalues, beta);
  divergences::BlockMarginals m = ctx.marginals(w);
  DensityMatrix block(m.single(0));
  return {beta, std::move(w), std::move(block), std::move(m)};
}

void fill_variances(ScalingRecord& r, const SpectralContext& ctx, const CanonicalReference& ref,
                    const ComplexMatrix& observable) {
  const auto ops = std::vector<ComplexMatrix>(static_cast<std::size_t>(ctx.block_count()), observable);
  const auto dec = divergences::variance_from_marginals(ref.marginals, ops);
  r.variance_local = dec.local;
  r.variance_cross = dec.cross;
  r.variance_block = dec.block_variance;
  r.variance_total = ctx.direct_variance(ref.weights, observable);
  r.variance_ratio = r.variance_block != 0.0 ? r.variance_total / r.variance_block : 0.0;
}

ScalingRecord eigenstate_record(const SpectralContext& ctx, Index i, double epsilon) {
  const auto t0 = std::chrono::steady_clock::now();
  ScalingRecord r;
  r.sites = ctx.lattice().sites;
  r.block_size = ctx.partition().block_size();
  r.block_count = ctx.block_count();
  r.i = i;
  r.energy_i = ctx.eig().eigenvalues(i);
  if (r.block_count == 1) {
    r.status = record_status::kDegenerate;
    return r;
  }
  const CanonicalReference ref = canonical_at(ctx, r.energy_i);
  r.beta = ref.beta;
  const DensityMatrix sigma(ctx.single(i));
  r.trace_norm = linalg::schatten_norm(sigma.matrix() - ref.block.matrix(), 1.0);
  r.trace_distance = 0.5 * r.trace_norm;
  const auto bs = divergences::bs_entropy(sigma, ref.block, 3, epsilon);
  r.bs_entropy = bs.value;
  const auto obs = divergences::formal_observable(ref.block, sigma, epsilon);
  fill_variances(r, ctx, ref, obs.matrix);
  r.block_spread = linalg::trace_distance(sigma.matrix(), ctx.reduce_pair(i, i, 1));
  r.regularized = bs.regularized || obs.regularized;
  r.wall_time = seconds_since(t0);
  return r;
}

}  // namespace

ScalingRecord offdiag_record(const SpectralContext& ctx, Index i, Index j, double epsilon) {
  if (i == j) throw DomainError("offdiag_record: needs i != j", static_cast<double>(i));
  const auto t0 = std::chrono::steady_clock::now();
  ScalingRecord r;
  r.sites = ctx.lattice().sites;
  r.block_size = ctx.partition().block_size();
  r.block_count = ctx.block_count();
  r.i = i;
  r.j = j;
  r.energy_i = ctx.eig().eigenvalues(i);
  r.energy_j = ctx.eig().eigenvalues(j);
  if (r.block_count == 1) {
    r.status = record_status::kDegenerate;
    return r;
  }
  const CanonicalReference ref = canonical_at(ctx, 0.5 * (r.energy_i + r.energy_j));
  r.beta = ref.beta;
  const TransitionMatrix sigma{ctx.reduce_pair(i, j, 0), i, j};
  r.trace_norm = linalg::schatten_norm(sigma.matrix, 1.0);
  const auto obs = divergences::formal_observable(ref.block, sigma, epsilon);
  fill_variances(r, ctx, ref, obs.matrix);
  r.regularized = obs.regularized;
  r.wall_time = seconds_since(t0);
  return r;
}

std::vector<ScalingRecord> eigenstate_scan(const SpectralContext& ctx, const SelectionPolicy& policy,
                                           int threads, double epsilon) {
  const auto window = select_window(ctx.dim(), policy);
  std::vector<ScalingRecord> out(window.size());
  parallel_for(window.size(), threads, [&](std::size_t t) { out[t] = eigenstate_record(ctx, window[t], epsilon); });
  return out;
}

std::vector<ScalingRecord> eigenpair_scan(const SpectralContext& ctx, const SelectionPolicy& policy,
                                          int threads, double epsilon) {
  const auto window = select_window(ctx.dim(), policy);
  if (window.size() < 2) return {};
  std::vector<ScalingRecord> out(window.size() - 1);
  parallel_for(out.size(), threads,
               [&](std::size_t t) { out[t] = offdiag_record(ctx, window[t], window[t + 1], epsilon); });
  return out;
}

namespace {

template <typename Scan>
std::vector<ScalingRecord> grid_scan(const std::vector<ScanSize>& sizes, const HamiltonianSpec& model,
                                     const SelectionPolicy& policy, int threads, Scan scan) {
  std::vector<ScalingRecord> out;
  for (const auto& size : sizes) {
    if (size.block_size < 1 || size.sites % size.block_size != 0) {
      ScalingRecord r;
      r.sites = size.sites;
      r.block_size = size.block_size;
      r.status = record_status::kNondivisible;
      out.push_back(r);
      continue;
    }
    LatticeSpec lattice;
    lattice.sites = size.sites;
    const SpectralContext ctx(lattice, model, size.block_size);
    auto part = scan(ctx, policy, threads);
    out.insert(out.end(), part.begin(), part.end());
  }
  std::stable_sort(out.begin(), out.end(), record_less);
  return out;
}

}  // namespace

std::vector<ScalingRecord> subsystem_eth_scan(const std::vector<ScanSize>& sizes, const HamiltonianSpec& model,
                                              const SelectionPolicy& policy, int threads) {
  return grid_scan(sizes, model, policy, threads, [](const SpectralContext& c, const SelectionPolicy& p, int t) {
    return eigenstate_scan(c, p, t);
  });
}

std::vector<ScalingRecord> offdiag_scan(const std::vector<ScanSize>& sizes, const HamiltonianSpec& model,
                                        const SelectionPolicy& policy, int threads) {
  return grid_scan(sizes, model, policy, threads, [](const SpectralContext& c, const SelectionPolicy& p, int t) {
    return eigenpair_scan(c, p, t);
  });
}

DecayProbe correlation_decay_probe(const divergences::BlockMarginals& marginals, const BlockPartition& partition) {
  const int c = partition.block_count();
  if (c < 3) throw DimensionError("correlation_decay_probe: needs at least three blocks");
  if (marginals.block_count() != c) throw DimensionError("correlation_decay_probe: marginals do not match partition");
  const Index db = partition.block_dim();
  DecayProbe probe;
  for (int k = 0; k < c; ++k) {
    for (int l = k + 1; l < c; ++l) {
      const ComplexMatrix& joint = marginals.pair(k, l);
      const ComplexMatrix product = linalg::kron(marginals.single(k), marginals.single(l));
      DecayRecord r;
      r.block_k = k;
      r.block_l = l;
      r.distance = partition.distance(k, l);
      r.corr_norm = linalg::schatten_norm(joint - product, 1.0);
      r.mutual_info = divergences::mutual_information(DensityMatrix(joint), db, db);
      probe.records.push_back(r);
    }
  }
  probe.fit = fit_decay(probe.records);
  return probe;
}

DecayProbe correlation_decay_probe(const DensityMatrix& rho, const BlockPartition& partition) {
  return correlation_decay_probe(divergences::BlockMarginals::from_state(rho, partition), partition);
}

DecayFit fit_decay(const std::vector<DecayRecord>& records) {
  std::map<int, std::pair<double, int>> by_distance;
  for (const auto& r : records) {
    auto& slot = by_distance[r.distance];
    slot.first += r.corr_norm;
    slot.second += 1;
  }
  std::vector<double> d;
  std::vector<double> log_d;
  std::vector<double> log_c;
  for (const auto& [dist, acc] : by_distance) {
    const double mean = acc.first / acc.second;
    // Below this the correlation is numerical noise.
    if (mean <= 1e-13) continue;
    d.push_back(dist);
    log_d.push_back(std::log(static_cast<double>(dist)));
    log_c.push_back(std::log(mean));
  }
  DecayFit fit;
  fit.points = static_cast<int>(d.size());
  if (d.size() < 2) return fit;
  const LineFit e = fit_line(d, log_c);
  const LineFit a = fit_line(log_d, log_c);
  fit.xi = e.slope < 0.0 ? -1.0 / e.slope : std::numeric_limits<double>::infinity();
  fit.exp_residual = e.ssr;
  fit.gamma = -a.slope;
  fit.alg_residual = a.ssr;
  fit.better_model = e.ssr <= a.ssr ? "exponential" : "algebraic";
  return fit;
}

std::vector<ChebyshevRow> chebyshev_from_spectrum(const ComplexMatrix& basis, const RealVector& probabilities,
                                                  const ComplexMatrix& a, const std::vector<double>& epsilons,
                                                  const std::string& label) {
  if (basis.cols() != probabilities.size() || a.rows() != basis.rows() || a.cols() != basis.rows()) {
    throw DimensionError("chebyshev: basis, weights and observable do not match");
  }
  const Index m = basis.cols();
  std::vector<Complex> values(static_cast<std::size_t>(m));
  Complex mean = 0.0;
  double second = 0.0;
  for (Index j = 0; j < m; ++j) {
    const Complex v = basis.col(j).dot(a * basis.col(j));
    values[static_cast<std::size_t>(j)] = v;
    mean += probabilities(j) * v;
    second += probabilities(j) * std::norm(v);
  }
  const double fluct = second - std::norm(mean);
  std::vector<ChebyshevRow> rows;
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw DomainError("chebyshev: epsilon must be positive", eps);
    double tail = 0.0;
    for (Index j = 0; j < m; ++j) {
      if (std::abs(values[static_cast<std::size_t>(j)] - mean) >= eps) tail += probabilities(j);
    }
    ChebyshevRow row;
    row.form = "standard";
    row.observable = label;
    row.epsilon = eps;
    row.empirical = tail;
    row.bound = fluct / (eps * eps);
    row.violated = row.empirical > row.bound + 1e-12;
    rows.push_back(row);
  }
  return rows;
}

std::vector<ChebyshevRow> chebyshev_concentration(const DensityMatrix& rho, const ComplexMatrix& basis,
                                                  const RealVector& probabilities, const ComplexMatrix& a,
                                                  const std::vector<double>& epsilons, const std::string& label) {
  // Validates that the basis diagonalizes rho.
  (void)divergences::fluctuation(rho, basis, probabilities, a);
  return chebyshev_from_spectrum(basis, probabilities, a, epsilons, label);
}

namespace {

// Shared machinery of the typicality chain: eigenvectors gathered per block,
// the regularized block state and its rescaling.
struct TypicalityKernel {
  const BlockPartition& partition;
  const ComplexMatrix& basis;
  const RealVector& probs;
  std::vector<linalg::SiteSplit> splits;
  DensityMatrix block_state;
  SpectralDecomposition block_eig;
  ComplexMatrix inv_half;
  bool regularized = false;
  // gathered[i * C + k] = vector i reshaped on block k.
  std::vector<ComplexMatrix> gathered;

  TypicalityKernel(const DensityMatrix& rho, const BlockPartition& part, const ComplexMatrix& b,
                   const RealVector& p, double epsilon)
      : partition(part),
        basis(b),
        probs(p),
        splits(make_block_splits(part)),
        block_state(states::reduce(rho, part, 0)),
        block_eig(),
        inv_half() {
    if (b.rows() != rho.dim() || b.cols() != p.size()) throw DimensionError("typicality: basis does not match state");
    const double defect = divergences::translation_defect(rho.matrix(), part.lattice(), part.block_size());
    if (defect > 1e-8) {
      std::ostringstream os;
      os << "typicality: state is not translation invariant, defect " << defect;
      throw DomainError(os.str(), defect);
    }
    const auto reg = states::regularize(block_state, epsilon);
    block_state = reg.state;
    regularized = reg.clamped;
    block_eig = linalg::hermitian_eig(block_state.matrix());
    RealVector ih(block_eig.dim());
    for (Index a = 0; a < ih.size(); ++a) ih(a) = 1.0 / std::sqrt(block_eig.eigenvalues(a));
    inv_half = block_eig.reconstruct(ih);
    const int c = part.block_count();
    gathered.resize(static_cast<std::size_t>(b.cols() * c));
    for (Index i = 0; i < b.cols(); ++i) {
      const ComplexVector v = b.col(i);
      for (int k = 0; k < c; ++k) gathered[static_cast<std::size_t>(i * c + k)] = splits[static_cast<std::size_t>(k)].gather(v);
    }
  }

  int c() const { return partition.block_count(); }
  ComplexMatrix rescale(const ComplexMatrix& x) const { return inv_half * x * inv_half; }
  double block_variance(const ComplexMatrix& x) const {
    return divergences::quantum_variance(block_state.matrix(), x);
  }
  // Block average (1/C) sum_k of the reduction of |i><j| on block k.
  ComplexMatrix averaged(Index i, Index j) const {
    const int cc = c();
    ComplexMatrix s = gathered[static_cast<std::size_t>(i * cc)] * gathered[static_cast<std::size_t>(j * cc)].adjoint();
    for (int k = 1; k < cc; ++k) {
      s += gathered[static_cast<std::size_t>(i * cc + k)] * gathered[static_cast<std::size_t>(j * cc + k)].adjoint();
    }
    return s / static_cast<double>(cc);
  }
  ComplexMatrix block0(Index i, Index j) const {
    const int cc = c();
    return gathered[static_cast<std::size_t>(i * cc)] * gathered[static_cast<std::size_t>(j * cc)].adjoint();
  }
  // Unit operator |alpha><beta| in the eigenbasis of the block state.
  ComplexMatrix unit(Index alpha, Index beta) const {
    return block_eig.eigenvectors.col(alpha) * block_eig.eigenvectors.col(beta).adjoint();
  }
  // sum_{alpha,beta} weight(alpha, beta) V(rho, O^B(|alpha><beta|)).
  double basis_aggregate(bool weight_on_ket) const {
    const Index d = block_eig.dim();
    double acc = 0.0;
    for (Index alpha = 0; alpha < d; ++alpha) {
      for (Index beta = 0; beta < d; ++beta) {
        const double w = block_eig.eigenvalues(weight_on_ket ? alpha : beta);
        acc += w * variance_eigenform(basis, probs, splits, rescale(unit(alpha, beta)));
      }
    }
    return acc;
  }
};

}  // namespace

std::vector<ChebyshevRow> averaged_chebyshev(const DensityMatrix& rho, const BlockPartition& partition,
                                             const ComplexMatrix& basis, const RealVector& probabilities,
                                             const std::vector<double>& epsilons, double epsilon_reg) {
  const TypicalityKernel kern(rho, partition, basis, probabilities, epsilon_reg);
  const Index m = basis.cols();
  std::vector<double> x(static_cast<std::size_t>(m), 0.0);
  for (Index i = 0; i < m; ++i) {
    if (probabilities(i) == 0.0) continue;
    double acc = 0.0;
    for (Index j = 0; j < m; ++j) acc += kern.block_variance(kern.rescale(kern.averaged(i, j)));
    x[static_cast<std::size_t>(i)] = acc;
  }
  const double aggregate = kern.basis_aggregate(true);
  std::vector<ChebyshevRow> rows;
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw DomainError("chebyshev: epsilon must be positive", eps);
    double tail = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (probabilities(i) != 0.0 && x[static_cast<std::size_t>(i)] >= eps * eps) tail += probabilities(i);
    }
    ChebyshevRow row;
    row.form = "averaged_formal";
    row.observable = "V_dg+V_off";
    row.epsilon = eps;
    row.empirical = tail;
    row.bound = aggregate / (eps * eps);
    row.violated = row.empirical > row.bound + 1e-12;
    rows.push_back(row);
  }
  return rows;
}

TypicalityReport typicality_balance(const DensityMatrix& rho, const BlockPartition& partition,
                                    const ComplexMatrix& basis, const RealVector& probabilities,
                                    std::uint64_t seed, double epsilon) {
  const TypicalityKernel kern(rho, partition, basis, probabilities, epsilon);
  TypicalityReport rep;
  rep.regularized = kern.regularized;
  const int c = partition.block_count();
  const Index m = basis.cols();
  const Index db = partition.block_dim();

  // Random Hermitian block observable for the conversion checks.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix a(db, db);
  for (Index r = 0; r < db; ++r) {
    for (Index s = 0; s < db; ++s) a(r, s) = Complex(normal(rng), normal(rng));
  }
  a = 0.5 * (a + a.adjoint()).eval();
  const auto dims = partition.lattice().site_dims();
  ComplexMatrix a_avg = ComplexMatrix::Zero(rho.dim(), rho.dim());
  for (int k = 0; k < c; ++k) a_avg += linalg::embed(a, dims, partition.sites(k));
  a_avg /= static_cast<double>(c);
  const ComplexMatrix a_eig = basis.adjoint() * a_avg * basis;

  const divergences::BlockMarginals marg = divergences::BlockMarginals::from_state(rho, partition);
  const auto ops_of = [c](const ComplexMatrix& op) { return std::vector<ComplexMatrix>(static_cast<std::size_t>(c), op); };

  for (Index i = 0; i < m; ++i) {
    const double p = probabilities(i);
    for (Index j = 0; j < m; ++j) {
      const ComplexMatrix s_avg = kern.averaged(i, j);
      const Complex lhs = trace_product(s_avg, a);
      const double conv = std::abs(lhs - a_eig(j, i));
      if (i == j) {
        rep.conversion_residual_diag = std::max(rep.conversion_residual_diag, conv);
      } else {
        rep.conversion_residual_off = std::max(rep.conversion_residual_off, conv);
      }
      if (p == 0.0) continue;
      const double v = p * kern.block_variance(kern.rescale(s_avg));
      if (i == j) {
        rep.v_dg += v;
      } else {
        rep.v_off += v;
      }
      const ComplexMatrix global_op = kern.rescale(kern.block0(i, j));
      rep.global_side += p * divergences::variance_from_marginals(marg, ops_of(global_op)).total;
    }
  }

  rep.basis_side = kern.basis_aggregate(true);
  rep.basis_side_swapped = kern.basis_aggregate(false);
  rep.identity_residual = std::abs(rep.v_dg + rep.v_off - rep.basis_side);
  rep.global_residual = std::abs(rep.v_dg + rep.v_off - rep.global_side);

  // Local-variance combination and orthogonality of the rescaled units.
  const Index d = kern.block_eig.dim();
  const RealVector& pp = kern.block_eig.eigenvalues;
  for (Index alpha = 0; alpha < d; ++alpha) {
    double lhs = pp(alpha) * kern.block_variance(kern.rescale(kern.unit(alpha, alpha)));
    ComplexMatrix row = kern.unit(alpha, alpha);
    for (Index beta = 0; beta < d; ++beta) {
      if (beta == alpha) continue;
      lhs += pp(beta) * kern.block_variance(kern.rescale(kern.unit(alpha, beta)));
      row += kern.unit(alpha, beta);
    }
    const double rhs = pp(alpha) * kern.block_variance(row / pp(alpha));
    rep.local_combination_residual = std::max(rep.local_combination_residual, std::abs(lhs - rhs));

    const ComplexMatrix diag = kern.rescale(kern.unit(alpha, alpha));
    for (Index beta = 0; beta < d; ++beta) {
      if (beta == alpha) continue;
      const ComplexMatrix off = kern.rescale(kern.unit(alpha, beta));
      rep.orthogonality_residual = std::max(rep.orthogonality_residual, (diag * off.adjoint()).norm());
      for (Index gamma = 0; gamma < d; ++gamma) {
        if (gamma == beta) continue;
        const ComplexMatrix other = kern.rescale(kern.unit(alpha, gamma));
        rep.orthogonality_residual = std::max(rep.orthogonality_residual, (other * off.adjoint()).norm());
      }
    }
  }
  return rep;
}

EquivalenceRecord ensemble_equivalence(const SpectralContext& ctx, const EnergyShell& shell, double epsilon) {
  if (shell.indices.empty()) throw DomainError("ensemble_equivalence: empty shell", shell.upper);
  const auto& energies = ctx.eig().eigenvalues;
  EquivalenceRecord r;
  r.sites = ctx.lattice().sites;
  r.block_size = ctx.partition().block_size();
  r.shell_upper = shell.upper;
  r.shell_width = shell.width;
  r.shell_states = static_cast<int>(shell.indices.size());
  const double inv_d = 1.0 / static_cast<double>(shell.indices.size());
  RealVector w_mc = RealVector::Zero(ctx.dim());
  for (Index i : shell.indices) {
    w_mc(i) = inv_d;
    r.mean_energy += inv_d * energies(i);
  }
  const ComplexMatrix mc_block = ctx.block_marginal(w_mc);
  r.beta = ensembles::match_beta(energies, r.mean_energy);
  const DensityMatrix c_block(ctx.block_marginal(ensembles::gibbs_weights(energies, r.beta)));
  r.lhs = linalg::schatten_norm(mc_block - c_block.matrix(), 1.0);
  r.lhs_half = 0.5 * r.lhs;

  const int c = ctx.block_count();
  for (Index i : shell.indices) {
    ComplexMatrix avg = ctx.single(i);
    for (int k = 1; k < c; ++k) avg += ctx.reduce_pair(i, i, k);
    avg /= static_cast<double>(c);
    r.convexity_middle += inv_d * linalg::schatten_norm(avg - c_block.matrix(), 1.0);
    const auto obs = divergences::formal_observable(c_block, DensityMatrix(avg), epsilon);
    r.regularized = r.regularized || obs.regularized;
    r.rhs += inv_d * std::sqrt(std::max(0.0, divergences::quantum_variance(c_block, obs.matrix)));
  }
  r.margin = r.rhs - r.lhs;
  return r;
}

EquivalenceRecord ensemble_equivalence(const ComplexMatrix& h, const LatticeSpec& lattice, double upper,
                                       double delta, int block_size, double epsilon) {
  const SpectralContext ctx(lattice, h, block_size);
  return ensemble_equivalence(ctx, ensembles::shell_indices(ctx.eig().eigenvalues, upper, delta), epsilon);
}

DivergenceReport inequality_audit(const BlockOperand& sigma, const DensityMatrix& rho, double epsilon) {
  return divergences::divergence_report(sigma, rho, epsilon);
}

DivergenceReport inequality_audit(const BlockOperand& sigma, const DensityMatrix& global_rho,
                                  const BlockPartition& partition, double epsilon) {
  DivergenceReport r = divergences::divergence_report(sigma, states::reduce(global_rho, partition, 0), epsilon);
  if (const auto* dm = std::get_if<DensityMatrix>(&sigma)) {
    r.pullup_residual = divergences::pullup_identity_residual(global_rho, partition, 0, *dm, epsilon);
  }
  return r;
}

ScalingFit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionError("fit_power_law: need at least two points");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("fit_power_law: values must be positive", y[i]);
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const LineFit f = fit_line(lx, ly);
  ScalingFit out;
  out.exponent = f.slope;
  out.intercept = f.intercept;
  out.points = static_cast<int>(x.size());
  const int dof = out.points - 2;
  if (dof < 1 || f.sxx <= 0.0) {
    out.half_width = std::numeric_limits<double>::infinity();
  } else {
    const boost::math::students_t dist(dof);
    const double t = boost::math::quantile(boost::math::complement(dist, 0.025));
    out.half_width = t * std::sqrt(f.ssr / dof / f.sxx);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw DimensionError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace subeth::experiments
