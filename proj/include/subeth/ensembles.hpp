#pragma once

#include <optional>
#include <vector>

#include "subeth/core.hpp"
#include "subeth/linalg.hpp"
#include "subeth/states.hpp"

namespace subeth {

struct EnsembleSpec {
  enum class Kind { kCanonical, kMicrocanonical };
  Kind kind = Kind::kCanonical;
  double beta = 0.0;
  /// Shell upper edge; empty selects the middle of the spectrum.
  std::optional<double> energy_center;
  /// Shell width; <= 0 selects the adaptive width.
  double delta = 0.0;

  bool operator==(const EnsembleSpec&) const = default;
};

/// Energy shell (upper - width, upper].
struct EnergyShell {
  double upper = 0.0;
  double width = 0.0;
  std::vector<Index> indices;
};

namespace ensembles {

/// exp(-beta E_i) / Z, computed with the exponent shifted to be <= 0.
RealVector gibbs_weights(const RealVector& energies, double beta);
/// <H>_beta from the spectrum.
double thermal_energy(const RealVector& energies, double beta);

DensityMatrix gibbs_state(const ComplexMatrix& h, double beta);
DensityMatrix gibbs_state(const SpectralDecomposition& h_eig, double beta);

/// beta with <H>_beta = target, by bisection on [-50/W, 50/W] (W the spectral
/// width) to |<H> - target| <= 1e-9 W. Rejects targets outside (E_min, E_max)
/// or not reachable inside the bracket.
double match_beta(const RealVector& energies, double target);
double match_beta(const ComplexMatrix& h, double target);

/// Indices i with E_i in (center - delta, center]; throws when empty, quoting
/// the eigenvalue nearest to the window.
EnergyShell shell_indices(const RealVector& energies, double upper, double delta);

/// Shell holding at least `min_states` eigenvalues nearest `center`, with
/// boundaries placed in spectral gaps so degenerate levels are never split.
EnergyShell adaptive_shell(const RealVector& energies, double center, Index min_states);

/// max(20, 0.5% of dim).
Index default_shell_size(Index dim);

struct Microcanonical {
  DensityMatrix state;
  EnergyShell shell;
};

/// (1/D) sum_{i in shell} |E_i><E_i|.
Microcanonical microcanonical_state(const SpectralDecomposition& h_eig, double upper, double delta);

}  // namespace ensembles
}  // namespace subeth
