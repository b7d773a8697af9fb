#pragma once

#include <map>
#include <string>
#include <vector>

#include "subeth/core.hpp"
#include "subeth/lattice.hpp"

namespace subeth {

/// Pauli string placed on consecutive sites starting at every site of the
/// ring, e.g. {"ZZ", 1.0} gives sum_i Z_i Z_{i+1}.
struct LocalTerm {
  std::string ops;
  double coefficient = 0.0;

  bool operator==(const LocalTerm&) const = default;
};

/// Model family and couplings of a translation-invariant chain Hamiltonian.
///   tfim_long:    sum_i [J Z_i Z_{i+1} + g X_i + h Z_i]
///   xxz_field:    sum_i [J (X_i X_{i+1} + Y_i Y_{i+1} + Delta Z_i Z_{i+1}) + h Z_i]
///   custom_local: sum of `terms`
struct HamiltonianSpec {
  std::string family = "tfim_long";
  std::map<std::string, double> couplings{{"J", 1.0}, {"g", 1.05}, {"h", 0.5}};
  std::vector<LocalTerm> terms;
  /// Interaction range in sites (derived from the family; informational).
  int range = 2;

  double coupling(const std::string& name) const;
  /// The family expanded into Pauli-string terms.
  std::vector<LocalTerm> expand() const;

  bool operator==(const HamiltonianSpec&) const = default;
};

namespace models {

/// Dense Hamiltonian on the periodic chain. Site 0 is the most significant
/// tensor factor; Z|0> = |0>, Z|1> = -|1>.
ComplexMatrix build_hamiltonian(const LatticeSpec& lattice, const HamiltonianSpec& spec);

/// Permutation unitary T with T X T^dagger moving site j content to site j+1.
ComplexMatrix translation_operator(const LatticeSpec& lattice);

/// ||T X T^dagger - X||_inf (induced infinity norm, an upper bound on the
/// spectral norm; equal for diagonal differences).
double check_translation_invariance(const ComplexMatrix& x, const LatticeSpec& lattice);

}  // namespace models
}  // namespace subeth
