#include "subeth/models.hpp"

#include <sstream>

#include "subeth/linalg.hpp"

namespace subeth {

double HamiltonianSpec::coupling(const std::string& name) const {
  const auto it = couplings.find(name);
  if (it == couplings.end()) {
    throw Error("Hamiltonian family '" + family + "' needs coupling '" + name + "'");
  }
  return it->second;
}

std::vector<LocalTerm> HamiltonianSpec::expand() const {
  if (family == "tfim_long") {
    return {{"ZZ", coupling("J")}, {"X", coupling("g")}, {"Z", coupling("h")}};
  }
  if (family == "xxz_field") {
    const double j = coupling("J");
    return {{"XX", j}, {"YY", j}, {"ZZ", j * coupling("Delta")}, {"Z", coupling("h")}};
  }
  if (family == "custom_local") {
    if (terms.empty()) throw Error("custom_local family needs at least one term");
    return terms;
  }
  throw Error("unknown Hamiltonian family '" + family + "'");
}

namespace models {

ComplexMatrix build_hamiltonian(const LatticeSpec& lattice, const HamiltonianSpec& spec) {
  lattice.validate();
  if (lattice.sites < 2) throw DimensionError("build_hamiltonian: need at least two sites");
  if (lattice.local_dim != 2) throw DimensionError("build_hamiltonian: Pauli models need local_dim = 2");
  const auto terms = spec.expand();
  const int n = lattice.sites;
  for (const auto& t : terms) {
    if (t.ops.empty() || static_cast<int>(t.ops.size()) > n) {
      throw Error("term '" + t.ops + "' does not fit on the chain");
    }
    for (char c : t.ops) {
      if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z') {
        throw Error("term '" + t.ops + "' contains a non-Pauli symbol");
      }
    }
  }

  const Index dim = lattice.full_dim();
  ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
  auto bit_mask = [n](int site) { return Index{1} << (n - 1 - site); };

  for (const auto& t : terms) {
    if (t.coefficient == 0.0) continue;
    for (int start = 0; start < n; ++start) {
      for (Index b = 0; b < dim; ++b) {
        Index image = b;
        Complex phase = t.coefficient;
        for (std::size_t p = 0; p < t.ops.size(); ++p) {
          const int site = (start + static_cast<int>(p)) % n;
          const Index mask = bit_mask(site);
          const bool up = (b & mask) == 0;
          switch (t.ops[p]) {
            case 'X':
              image ^= mask;
              break;
            case 'Y':
              // Y|0> = i|1>, Y|1> = -i|0>
              image ^= mask;
              phase *= up ? Complex(0.0, 1.0) : Complex(0.0, -1.0);
              break;
            case 'Z':
              if (!up) phase = -phase;
              break;
            default:
              break;
          }
        }
        h(image, b) += phase;
      }
    }
  }
  return h;
}

ComplexMatrix translation_operator(const LatticeSpec& lattice) {
  const Index dim = lattice.full_dim();
  const auto perm = linalg::translation_permutation(lattice, 1);
  ComplexMatrix t = ComplexMatrix::Zero(dim, dim);
  for (Index a = 0; a < dim; ++a) t(perm[static_cast<std::size_t>(a)], a) = 1.0;
  return t;
}

double check_translation_invariance(const ComplexMatrix& x, const LatticeSpec& lattice) {
  return linalg::inf_norm(linalg::translate(x, lattice, 1) - x);
}

}  // namespace models
}  // namespace subeth
