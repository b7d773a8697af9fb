#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <set>

#include "subeth/divergences.hpp"
#include "subeth/ensembles.hpp"
#include "subeth/experiments.hpp"
#include "subeth/linalg.hpp"
#include "subeth/models.hpp"
#include "support.hpp"

using namespace subeth;
using namespace testing_support;
namespace ex = subeth::experiments;
namespace dv = subeth::divergences;

namespace {

LatticeSpec chain(int n) {
  LatticeSpec l;
  l.sites = n;
  return l;
}

HamiltonianSpec classical_ising() {
  HamiltonianSpec s;
  s.couplings = {{"J", 1.0}, {"g", 0.0}, {"h", 0.0}};
  return s;
}

// Dense reference for one diagonal record: every quantity recomputed from
// full-lattice matrices.
struct DenseRecord {
  double trace_norm, bs, total, block;
};

DenseRecord dense_record(const ComplexMatrix& h, const LatticeSpec& lattice, int block_size, Index i, double beta) {
  const auto eig = linalg::hermitian_eig(h);
  const ComplexVector v = eig.eigenvectors.col(i);
  std::vector<int> keep;
  for (int s = 0; s < block_size; ++s) keep.push_back(s);
  const DensityMatrix sigma(oracle_partial_trace(v * v.adjoint(), lattice.sites, keep));
  const DensityMatrix rho = ensembles::gibbs_state(h, beta);
  const DensityMatrix rho1(oracle_partial_trace(rho.matrix(), lattice.sites, keep));
  const ComplexMatrix inv_half = oracle_function(rho1.matrix(), [](double x) { return 1.0 / std::sqrt(x); });
  const ComplexMatrix o = inv_half * sigma.matrix() * inv_half;
  const BlockPartition p(lattice, block_size);
  ComplexMatrix avg = ComplexMatrix::Zero(h.rows(), h.cols());
  for (int k = 0; k < p.block_count(); ++k) avg += linalg::embed(o, lattice.site_dims(), p.sites(k));
  avg /= static_cast<double>(p.block_count());
  const ComplexMatrix o0 = linalg::embed(o, lattice.site_dims(), p.sites(0));
  const ComplexMatrix x = o;
  const ComplexMatrix xlx = oracle_function(x, [](double y) { return y > 1e-14 ? y * std::log(y) : 0.0; });
  const ComplexMatrix r_half = oracle_function(rho1.matrix(), [](double y) { return std::sqrt(y); });
  return {oracle_trace_norm(sigma.matrix() - rho1.matrix()), (r_half * xlx * r_half).trace().real(),
          dv::quantum_variance(rho, avg), dv::quantum_variance(rho, o0)};
}

}  // namespace

TEST_CASE("window selection") {
  const SelectionPolicy p;
  const auto w256 = ex::select_window(256, p);
  CHECK(w256.size() == 25);
  CHECK(w256.front() == 115);
  CHECK(ex::select_window(16, p).size() == 1);
  CHECK(ex::select_window(16, p).front() == 7);
  const auto w4096 = ex::select_window(4096, p);
  CHECK(w4096.size() == 50);
  CHECK(w4096.front() == 2023);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  ex::parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(ex::parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw DomainError("boom", 7.0);
                  }),
                  DomainError);
}

TEST_CASE("degenerate and nondivisible scan sizes") {
  const auto recs = ex::subsystem_eth_scan({{4, 4}, {9, 2}}, HamiltonianSpec{}, SelectionPolicy{});
  std::set<std::string> statuses;
  for (const auto& r : recs) statuses.insert(r.status);
  CHECK(statuses.count(record_status::kDegenerate) == 1);
  CHECK(statuses.count(record_status::kNondivisible) == 1);
}

TEST_CASE("classical Ising N = 4 matches a hand-built dense reference") {
  const LatticeSpec lattice = chain(4);
  const ComplexMatrix h = models::build_hamiltonian(lattice, classical_ising());
  const ex::SpectralContext ctx(lattice, h, 2);
  SelectionPolicy interior;
  interior.window_fraction = 0.5;
  const auto recs = ex::eigenstate_scan(ctx, interior);
  REQUIRE(recs.size() == 8);
  for (const auto& r : recs) {
    CHECK(r.energy_i == doctest::Approx(0.0));
    CHECK(std::abs(r.beta) < 1e-8);
    const auto ref = dense_record(h, lattice, 2, r.i, r.beta);
    CHECK(r.trace_norm == doctest::Approx(ref.trace_norm).epsilon(1e-9));
    CHECK(r.variance_total == doctest::Approx(ref.total).epsilon(1e-8));
    CHECK(r.variance_block == doctest::Approx(ref.block).epsilon(1e-8));
    // A computational basis eigenvector reduces to a basis projector:
    // ||P - I/4||_1 = 3/4 + 3 * 1/4.
    if (ctx.eig().eigenvectors.col(r.i).cwiseAbs().maxCoeff() > 1.0 - 1e-12) {
      CHECK(r.trace_norm == doctest::Approx(1.5));
    }
  }
  // Edge levels have no finite matching beta.
  SelectionPolicy everything;
  everything.window_fraction = 1.0;
  CHECK_THROWS_AS(ex::eigenstate_scan(ctx, everything), DomainError);
}

TEST_CASE("N = 8 chaotic chain records agree with the dense reference") {
  const LatticeSpec lattice = chain(8);
  const ComplexMatrix h = models::build_hamiltonian(lattice, HamiltonianSpec{});
  const ex::SpectralContext ctx(lattice, h, 2);
  const auto recs = ex::eigenstate_scan(ctx, SelectionPolicy{}, 2);
  REQUIRE(recs.size() == 25);
  for (std::size_t t = 1; t < recs.size(); ++t) CHECK(recs[t - 1].i < recs[t].i);
  for (std::size_t t = 0; t < recs.size(); t += 8) {
    const auto& r = recs[t];
    const auto ref = dense_record(h, lattice, 2, r.i, r.beta);
    CHECK(r.trace_norm == doctest::Approx(ref.trace_norm).epsilon(1e-9));
    CHECK(r.bs_entropy == doctest::Approx(ref.bs).epsilon(1e-8));
    CHECK(r.variance_total == doctest::Approx(ref.total).epsilon(1e-8));
    CHECK(r.variance_block == doctest::Approx(ref.block).epsilon(1e-8));
    CHECK(ensembles::thermal_energy(ctx.eig().eigenvalues, r.beta) == doctest::Approx(r.energy_i).epsilon(1e-8));
  }
  for (const auto& r : recs) {
    CHECK(r.trace_distance == doctest::Approx(0.5 * r.trace_norm));
    CHECK(std::abs(r.variance_total - r.variance_local - r.variance_cross) < 1e-8);
    CHECK(std::abs(r.variance_local - r.variance_block / 4.0) < 1e-8);
    CHECK(r.trace_norm * r.trace_norm <= r.variance_block + 1e-8);
    CHECK(r.trace_norm * r.trace_norm <= 2.0 * r.bs_entropy + 1e-8);
  }
}

TEST_CASE("off-diagonal records") {
  const LatticeSpec lattice = chain(8);
  const ex::SpectralContext ctx(lattice, HamiltonianSpec{}, 2);
  CHECK_THROWS_AS(ex::offdiag_record(ctx, 3, 3), DomainError);
  const auto recs = ex::eigenpair_scan(ctx, SelectionPolicy{});
  CHECK(recs.size() == 24);
  for (const auto& r : recs) {
    CHECK(r.j == r.i + 1);
    CHECK(std::abs(r.variance_total - r.variance_local - r.variance_cross) < 1e-8);
    CHECK(r.trace_norm * r.trace_norm <= r.variance_block + 1e-8);
  }
  const auto& eig = ctx.eig();
  const auto& r = recs.front();
  const ComplexMatrix direct = states::reduce_outer(eig.eigenvectors.col(r.i), eig.eigenvectors.col(r.j),
                                                    ctx.partition(), 0);
  CHECK(r.trace_norm == doctest::Approx(oracle_trace_norm(direct)).epsilon(1e-10));
}

TEST_CASE("orthogonal product states differing on the traced site reduce to zero") {
  const BlockPartition p(chain(2), 1);
  ComplexVector e00 = ComplexVector::Zero(4), e01 = ComplexVector::Zero(4);
  e00(0) = 1.0;
  e01(1) = 1.0;
  CHECK(max_abs(states::reduce_outer(e00, e01, p, 0)) == 0.0);
}

TEST_CASE("correlation decay") {
  Gen gen(71);
  const LatticeSpec lattice = chain(6);
  const BlockPartition p(lattice, 2);
  const ComplexMatrix r = gen.density(4);
  const auto prod = ex::correlation_decay_probe(DensityMatrix(linalg::kron(r, linalg::kron(r, r))), p);
  for (const auto& d : prod.records) CHECK(d.corr_norm <= 1e-10);

  const ex::SpectralContext ctx(chain(8), HamiltonianSpec{}, 2);
  const auto flat = ex::correlation_decay_probe(ctx.marginals(ensembles::gibbs_weights(ctx.eig().eigenvalues, 0.0)),
                                                ctx.partition());
  CHECK(flat.records.size() == 6);
  for (const auto& d : flat.records) CHECK(d.corr_norm <= 1e-10);
  CHECK(flat.fit.better_model == "none");

  // Marginal route against the dense state.
  const RealVector w = ensembles::gibbs_weights(ctx.eig().eigenvalues, 0.3);
  const auto fast = ex::correlation_decay_probe(ctx.marginals(w), ctx.partition());
  const auto dense = ex::correlation_decay_probe(DensityMatrix::from_eigensystem(ctx.eig().eigenvectors, w),
                                                 ctx.partition());
  for (std::size_t t = 0; t < fast.records.size(); ++t) {
    CHECK(fast.records[t].corr_norm == doctest::Approx(dense.records[t].corr_norm).epsilon(1e-9));
    CHECK(fast.records[t].mutual_info == doctest::Approx(dense.records[t].mutual_info).epsilon(1e-8));
  }
  CHECK_THROWS_AS(ex::correlation_decay_probe(DensityMatrix(gen.density(16)), BlockPartition(chain(4), 2)),
                  DimensionError);
}

TEST_CASE("decay fit recovers an exact exponential") {
  std::vector<DecayRecord> recs;
  for (int d = 1; d <= 5; d += 2) recs.push_back({0, d, d, 0.3 * std::exp(-d / 0.8), 0.0});
  const auto fit = ex::fit_decay(recs);
  CHECK(fit.better_model == "exponential");
  CHECK(fit.xi == doctest::Approx(0.8).epsilon(1e-10));
  CHECK(fit.points == 3);
}

TEST_CASE("Chebyshev concentration: fixed cases") {
  const DensityMatrix mixed(diag({0.5, 0.5}));
  const ComplexMatrix basis = ComplexMatrix::Identity(2, 2);
  const RealVector p = RealVector::Constant(2, 0.5);
  const auto rows = ex::chebyshev_concentration(mixed, basis, p, pauli_z(), {0.5});
  CHECK(rows[0].empirical == doctest::Approx(1.0));
  CHECK(rows[0].bound == doctest::Approx(4.0));
  CHECK_FALSE(rows[0].violated);
  for (const auto& r : ex::chebyshev_concentration(mixed, basis, p, ComplexMatrix::Identity(2, 2), {0.01, 1.0})) {
    CHECK(r.empirical == 0.0);
  }
  CHECK_THROWS(ex::chebyshev_concentration(mixed, basis, p, pauli_z(), {0.0}));
}

TEST_CASE("property: Chebyshev tails never exceed the bound") {
  Gen gen(72);
  for (int t = 0; t < 30; ++t) {
    const Index d = gen.integer(2, 12);
    const ComplexMatrix u = gen.unitary(d);
    RealVector w(d);
    for (Index i = 0; i < d; ++i) w(i) = gen.uniform(0.0, 1.0);
    w /= w.sum();
    const DensityMatrix rho = DensityMatrix::from_eigensystem(u, w);
    for (const auto& r : ex::chebyshev_concentration(rho, u, w, gen.hermitian(d), {0.05, 0.2, 0.5, 1.0, 3.0})) {
      CHECK_FALSE(r.violated);
    }
  }
}

TEST_CASE("averaged Chebyshev form on a small microcanonical state") {
  const ex::SpectralContext ctx(chain(6), HamiltonianSpec{}, 2);
  const auto& e = ctx.eig().eigenvalues;
  const auto shell = ensembles::adaptive_shell(e, e(32), 10);
  RealVector w = RealVector::Zero(64);
  for (Index i : shell.indices) w(i) = 1.0 / static_cast<double>(shell.indices.size());
  const DensityMatrix rho = DensityMatrix::from_eigensystem(ctx.eig().eigenvectors, w);
  const auto rows = ex::averaged_chebyshev(rho, ctx.partition(), ctx.eig().eigenvectors, w, {0.1, 0.5, 1.0, 2.0});
  for (const auto& r : rows) {
    CHECK(r.form == "averaged_formal");
    CHECK_FALSE(r.violated);
  }
}

TEST_CASE("typicality balance") {
  // C = 1: the aggregate is the completeness relation of the variance.
  const ex::SpectralContext one(chain(2), HamiltonianSpec{}, 2);
  const RealVector w1 = ensembles::gibbs_weights(one.eig().eigenvalues, 0.5);
  const auto r1 = ex::typicality_balance(DensityMatrix::from_eigensystem(one.eig().eigenvectors, w1),
                                         one.partition(), one.eig().eigenvectors, w1, 3);
  CHECK(r1.identity_residual < 1e-8);

  const ex::SpectralContext ctx(chain(6), HamiltonianSpec{}, 2);
  for (double beta : {0.0, 0.4}) {
    const RealVector w = ensembles::gibbs_weights(ctx.eig().eigenvalues, beta);
    const auto r = ex::typicality_balance(DensityMatrix::from_eigensystem(ctx.eig().eigenvectors, w),
                                          ctx.partition(), ctx.eig().eigenvectors, w, 5);
    CHECK(r.identity_residual <= 1e-6 * std::max(1.0, r.basis_side));
    CHECK(r.global_residual <= 1e-6 * std::max(1.0, r.basis_side));
    CHECK(r.local_combination_residual <= 1e-6 * std::max(1.0, r.basis_side));
    CHECK(r.orthogonality_residual <= 1e-10);
    CHECK(r.conversion_residual_diag <= 1e-6);
    CHECK(r.conversion_residual_off <= 1e-6);
    CHECK(r.basis_side == doctest::Approx(r.v_dg + r.v_off).epsilon(1e-6));
  }
}

TEST_CASE("ensemble equivalence") {
  const LatticeSpec lattice = chain(6);
  const ComplexMatrix h = models::build_hamiltonian(lattice, HamiltonianSpec{});
  const ex::SpectralContext ctx(lattice, h, 2);
  const auto& e = ctx.eig().eigenvalues;

  // Full spectrum at infinite temperature: both reductions are maximally mixed.
  EnergyShell full{e(63), e(63) - e(0) + 1.0, {}};
  for (Index i = 0; i < 64; ++i) full.indices.push_back(i);
  const auto all = ex::ensemble_equivalence(ctx, full);
  CHECK(all.lhs <= 1e-10);
  CHECK(std::abs(all.beta) < 1e-8);

  // One state: lhs is that eigenstate's full-norm distance to the matched canonical block.
  const ex::SpectralContext c2(lattice, h, 2);
  EnergyShell single{e(30), 0.0, {30}};
  const auto one = ex::ensemble_equivalence(c2, single);
  const auto rec = ex::eigenstate_scan(c2, SelectionPolicy{1.0 / 64.0, 1, 20, 0.005});
  REQUIRE(rec.size() == 1);
  CHECK(rec[0].i == 31);
  const auto rec30 = ex::eigenstate_scan(c2, SelectionPolicy{3.0 / 64.0, 3, 20, 0.005});
  CHECK(rec30[0].i == 30);
  CHECK(one.lhs == doctest::Approx(rec30[0].trace_norm).epsilon(1e-9));

  const auto shell = ensembles::adaptive_shell(e, e(32), 12);
  const auto r = ex::ensemble_equivalence(ctx, shell);
  CHECK(r.lhs <= r.convexity_middle + 1e-8);
  CHECK(r.convexity_middle <= r.rhs + 1e-8);
  CHECK(r.margin > 0.0);

  // Explicit-window overload.
  const auto same = ex::ensemble_equivalence(h, lattice, shell.upper, shell.width, 2);
  CHECK(same.lhs == doctest::Approx(r.lhs));
  CHECK_THROWS_AS(ex::ensemble_equivalence(h, lattice, e(63) + 5.0, 0.1, 2), DomainError);
}

TEST_CASE("inequality audit with pull-up") {
  Gen gen(73);
  const LatticeSpec lattice = chain(4);
  const BlockPartition p(lattice, 2);
  const DensityMatrix g = ensembles::gibbs_state(models::build_hamiltonian(lattice, HamiltonianSpec{}), 0.6);
  const auto rep = ex::inequality_audit(DensityMatrix(gen.density(4)), g, p);
  REQUIRE(rep.pullup_residual.has_value());
  CHECK(*rep.pullup_residual < 1e-6);
  CHECK(rep.min_slack() >= -1e-8);
  CHECK(rep.max_form_disagreement() <= 1e-8);
}

TEST_CASE("power-law fit and median") {
  const std::vector<double> x{8, 10, 12, 14};
  std::vector<double> y;
  for (double n : x) y.push_back(3.0 * std::pow(n, -0.5));
  const auto fit = ex::fit_power_law(x, y);
  CHECK(fit.exponent == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(std::exp(fit.intercept) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(fit.half_width < 1e-8);
  CHECK(fit.points == 4);
  CHECK(std::isinf(ex::fit_power_law({8, 10}, {0.2, 0.1}).half_width));
  CHECK(ex::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(ex::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}
