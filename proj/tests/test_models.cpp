#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "subeth/linalg.hpp"
#include "subeth/models.hpp"
#include "support.hpp"

using namespace subeth;
using namespace testing_support;

namespace {

LatticeSpec chain(int n) {
  LatticeSpec l;
  l.sites = n;
  return l;
}

HamiltonianSpec tfim(double j, double g, double h) {
  HamiltonianSpec s;
  s.couplings = {{"J", j}, {"g", g}, {"h", h}};
  return s;
}

}  // namespace

TEST_CASE("two-site Ising bond counted on both ring links") {
  const ComplexMatrix h = models::build_hamiltonian(chain(2), tfim(1.0, 0.0, 0.0));
  CHECK(max_abs(h - diag({2.0, -2.0, -2.0, 2.0})) < 1e-14);
}

TEST_CASE("three decoupled transverse fields") {
  const auto eig = linalg::hermitian_eig(models::build_hamiltonian(chain(3), tfim(0.0, 1.0, 0.0)));
  const double expected[] = {-3, -1, -1, -1, 1, 1, 1, 3};
  for (Index i = 0; i < 8; ++i) CHECK(eig.eigenvalues(i) == doctest::Approx(expected[i]));
}

TEST_CASE("property: classical Ising spectra are integer multiples of J") {
  for (int n = 2; n <= 4; ++n) {
    for (double j : {1.0, -0.7, 2.5}) {
      const ComplexMatrix h = models::build_hamiltonian(chain(n), tfim(j, 0.0, 0.0));
      const RealVector ev = linalg::hermitian_eig(h).eigenvalues;
      for (Index i = 0; i < ev.size(); ++i) {
        const double q = ev(i) / j;
        CHECK(std::abs(q - std::round(q)) < 1e-12);
      }
    }
  }
}

TEST_CASE("translation operator") {
  CHECK(max_abs(models::translation_operator(chain(1)) - ComplexMatrix::Identity(2, 2)) == 0.0);
  ComplexMatrix swap = ComplexMatrix::Zero(4, 4);
  swap(0, 0) = swap(3, 3) = swap(1, 2) = swap(2, 1) = 1.0;
  CHECK(max_abs(models::translation_operator(chain(2)) - swap) == 0.0);

  Gen gen(31);
  const ComplexMatrix t = models::translation_operator(chain(5));
  const ComplexVector v = gen.unit(32);
  ComplexVector u = v;
  for (int k = 0; k < 5; ++k) u = t * u;
  CHECK((u - v).norm() < 1e-12);
}

TEST_CASE("translation invariance checks") {
  CHECK(models::check_translation_invariance(ComplexMatrix::Identity(4, 4), chain(2)) == 0.0);
  const ComplexMatrix zi = linalg::kron(pauli_z(), ComplexMatrix::Identity(2, 2));
  CHECK(models::check_translation_invariance(zi, chain(2)) == doctest::Approx(2.0));
}

TEST_CASE("property: every family is Hermitian and translation invariant") {
  Gen gen(32);
  for (int t = 0; t < 12; ++t) {
    HamiltonianSpec spec;
    switch (t % 3) {
      case 0:
        spec = tfim(gen.normal(), gen.normal(), gen.normal());
        break;
      case 1:
        spec.family = "xxz_field";
        spec.couplings = {{"J", gen.normal()}, {"Delta", gen.normal()}, {"h", gen.normal()}};
        break;
      default:
        spec.family = "custom_local";
        spec.couplings.clear();
        spec.terms = {{"XZ", gen.normal()}, {"Y", gen.normal()}, {"ZIZ", gen.normal()}};
        break;
    }
    const LatticeSpec lattice = chain(gen.integer(3, 6));
    const ComplexMatrix h = models::build_hamiltonian(lattice, spec);
    CHECK(linalg::hermiticity_defect(h) < 1e-12);
    const ComplexMatrix tr = models::translation_operator(lattice);
    CHECK(linalg::inf_norm(h * tr - tr * h) <= 1e-8);
    const RealVector a = oracle_eigenvalues(h), b = oracle_eigenvalues(linalg::translate(h, lattice, 1));
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("model errors") {
  HamiltonianSpec bad;
  bad.family = "heisenberg_ladder";
  CHECK_THROWS_AS(models::build_hamiltonian(chain(4), bad), Error);
  CHECK_THROWS_AS(models::build_hamiltonian(chain(1), tfim(1, 1, 1)), DimensionError);
}
