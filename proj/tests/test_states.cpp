#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "subeth/linalg.hpp"
#include "subeth/states.hpp"
#include "support.hpp"

using namespace subeth;
using namespace testing_support;

namespace {

LatticeSpec chain(int n) {
  LatticeSpec l;
  l.sites = n;
  return l;
}

}  // namespace

TEST_CASE("DensityMatrix validation") {
  CHECK_NOTHROW(DensityMatrix(diag({0.25, 0.75})));
  CHECK_THROWS_AS(DensityMatrix(diag({0.5, 0.6})), DomainError);
  CHECK_THROWS_AS(DensityMatrix(diag({1.5, -0.5})), DomainError);
  ComplexMatrix skew = diag({0.5, 0.5});
  skew(0, 1) = 0.3;
  CHECK_THROWS_AS(DensityMatrix{skew}, DomainError);
  try {
    DensityMatrix bad(diag({1.2, -0.2}));
    FAIL("accepted a negative eigenvalue");
  } catch (const DomainError& e) {
    CHECK(e.value() == doctest::Approx(-0.2));
  }
}

TEST_CASE("property: mixtures of projectors are states") {
  Gen gen(21);
  for (int t = 0; t < 30; ++t) {
    const Index dim = gen.integer(1, 9);
    const int terms = gen.integer(1, 5);
    ComplexMatrix mix = ComplexMatrix::Zero(dim, dim);
    std::vector<double> p(static_cast<std::size_t>(terms));
    double total = 0.0;
    for (double& x : p) total += (x = gen.uniform(0.0, 1.0));
    for (double& x : p) {
      x /= total;
      mix += x * states::pure_projector(gen.unit(dim)).matrix();
    }
    CHECK_NOTHROW(DensityMatrix{mix});
  }
}

TEST_CASE("pure projectors") {
  ComplexVector e0 = ComplexVector::Zero(2);
  e0(0) = 1.0;
  CHECK(max_abs(states::pure_projector(e0).matrix() - diag({1.0, 0.0})) < 1e-15);
  ComplexVector plus = ComplexVector::Ones(2) / std::sqrt(2.0);
  CHECK(max_abs(states::pure_projector(plus).matrix() - ComplexMatrix::Constant(2, 2, 0.5)) < 1e-15);
  CHECK_THROWS_AS(states::pure_projector(2.0 * plus), DomainError);

  Gen gen(22);
  for (int t = 0; t < 20; ++t) {
    const auto pi = states::pure_projector(gen.unit(gen.integer(1, 16))).matrix();
    CHECK(max_abs(pi * pi - pi) < 1e-10);
  }
}

TEST_CASE("block partition geometry") {
  const BlockPartition p(chain(12), 2);
  CHECK(p.block_count() == 6);
  CHECK(p.sites(1) == std::vector<int>{2, 3});
  CHECK(p.distance(0, 1) == 1);
  CHECK(p.distance(0, 2) == 3);
  CHECK(p.distance(0, 3) == 5);
  CHECK(p.distance(0, 5) == 1);
  CHECK(p.pair_sites(0, 2) == std::vector<int>{0, 1, 4, 5});
  CHECK_THROWS_AS(BlockPartition(chain(9), 2), DimensionError);
  CHECK_THROWS_AS(p.check_block(6), DimensionError);
}

TEST_CASE("reduce: product states and index summation") {
  Gen gen(23);
  const ComplexMatrix r1 = gen.density(4), r2 = gen.density(4), r3 = gen.density(4);
  const DensityMatrix prod(linalg::kron(r1, linalg::kron(r2, r3)));
  const BlockPartition p(chain(6), 2);
  CHECK(max_abs(states::reduce(prod, p, 0).matrix() - r1) < 1e-12);
  CHECK(max_abs(states::reduce(prod, p, 1).matrix() - r2) < 1e-12);

  const BlockPartition p8(chain(8), 2);
  const ComplexVector v = gen.unit(256);
  const ComplexMatrix oracle = oracle_partial_trace(v * v.adjoint(), 8, {2, 3});
  CHECK(max_abs(states::reduce_pure(v, p8, 1).matrix() - oracle) < 1e-12);
  CHECK(max_abs(states::reduce(states::pure_projector(v), p8, 1).matrix() - oracle) < 1e-12);
}

TEST_CASE("reduce is linear over an orthonormal basis") {
  Gen gen(24);
  const BlockPartition p(chain(4), 2);
  const ComplexMatrix u = gen.unitary(16);
  RealVector w(16);
  for (Index i = 0; i < 16; ++i) w(i) = gen.uniform(0.0, 1.0);
  w /= w.sum();
  const DensityMatrix rho = DensityMatrix::from_eigensystem(u, w);
  ComplexMatrix acc = ComplexMatrix::Zero(4, 4);
  for (Index i = 0; i < 16; ++i) acc += w(i) * states::reduce_pure(u.col(i), p, 0).matrix();
  CHECK(max_abs(acc - states::reduce(rho, p, 0).matrix()) < 1e-12);
}

TEST_CASE("property: reduction commutes with block translation") {
  Gen gen(25);
  for (int t = 0; t < 10; ++t) {
    const int n = 2 * gen.integer(2, 3);
    const LatticeSpec lattice = chain(n);
    const BlockPartition p(lattice, 2);
    const DensityMatrix x(gen.density(lattice.full_dim()));
    const int c = p.block_count();
    const int k = gen.integer(0, c - 1);
    const DensityMatrix tx(linalg::translate(x.matrix(), lattice, k * 2));
    for (int b = 0; b < c; ++b) {
      const int source = ((b - k) % c + c) % c;
      CHECK(max_abs(states::reduce(tx, p, b).matrix() - states::reduce(x, p, source).matrix()) < 1e-12);
    }
  }
}

TEST_CASE("property: transition reductions") {
  Gen gen(26);
  const BlockPartition p(chain(6), 2);
  for (int t = 0; t < 10; ++t) {
    const ComplexMatrix u = gen.unitary(64);
    const Index i = gen.integer(0, 63), j = gen.integer(0, 63);
    const ComplexMatrix sij = states::reduce_outer(u.col(i), u.col(j), p, 1);
    const ComplexMatrix sji = states::reduce_outer(u.col(j), u.col(i), p, 1);
    CHECK(max_abs(sij.adjoint() - sji) < 1e-10);
    const Complex overlap = (sij * sji).trace();
    CHECK(std::abs(overlap.imag()) < 1e-12);
    CHECK(overlap.real() >= -1e-12);
    if (i != j) CHECK(std::abs(sij.trace()) < 1e-12);
    const auto tr = states::transition(u.col(i), u.col(j), i, j);
    CHECK(max_abs(states::reduce(tr, p, 1).matrix - sij) < 1e-12);
  }
}

TEST_CASE("regularize") {
  Gen gen(27);
  const DensityMatrix full(gen.density(3));
  const auto same = states::regularize(full);
  CHECK_FALSE(same.clamped);
  CHECK(max_abs(same.state.matrix() - full.matrix()) == 0.0);

  const auto clamped = states::regularize(DensityMatrix(diag({1.0, 0.0})));
  CHECK(clamped.clamped);
  const RealVector ev = oracle_eigenvalues(clamped.state.matrix());
  CHECK(ev(0) == doctest::Approx(1e-12).epsilon(1e-6));
  CHECK(ev(1) == doctest::Approx(1.0 - 1e-12));

  for (int t = 0; t < 20; ++t) {
    const Index dim = gen.integer(2, 8);
    const auto r = states::regularize(DensityMatrix(gen.density(dim, gen.integer(1, static_cast<int>(dim) - 1))));
    CHECK(r.clamped);
    // Recomputed eigenvalues carry absolute roundoff of order eps * ||rho||.
    CHECK(oracle_eigenvalues(r.state.matrix()).minCoeff() >= 1e-12 - 1e-15);
    CHECK(std::abs(r.state.matrix().trace().real() - 1.0) < 1e-12);
  }
}
