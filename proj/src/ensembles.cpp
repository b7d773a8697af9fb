#include "subeth/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace subeth::ensembles {

RealVector gibbs_weights(const RealVector& energies, double beta) {
  if (energies.size() == 0) throw DimensionError("gibbs_weights: empty spectrum");
  RealVector exponent = -beta * energies;
  exponent.array() -= exponent.maxCoeff();
  RealVector w = exponent.array().exp();
  return w / w.sum();
}

double thermal_energy(const RealVector& energies, double beta) {
  return gibbs_weights(energies, beta).dot(energies);
}

DensityMatrix gibbs_state(const SpectralDecomposition& h_eig, double beta) {
  return DensityMatrix::from_eigensystem(h_eig.eigenvectors, gibbs_weights(h_eig.eigenvalues, beta));
}

DensityMatrix gibbs_state(const ComplexMatrix& h, double beta) {
  return gibbs_state(linalg::hermitian_eig(h), beta);
}

double match_beta(const RealVector& energies, double target) {
  const double e_min = energies.minCoeff();
  const double e_max = energies.maxCoeff();
  const double width = e_max - e_min;
  if (!(target > e_min && target < e_max)) {
    std::ostringstream os;
    os << "match_beta: target energy " << target << " outside open spectral range (" << e_min << ", "
       << e_max << ")";
    throw DomainError(os.str(), target);
  }
  const double beta_max = 50.0 / width;
  const double tol = 1e-9 * width;
  // <H>_beta decreases in beta.
  double lo = -beta_max;
  double hi = beta_max;
  if (thermal_energy(energies, hi) > target + tol || thermal_energy(energies, lo) < target - tol) {
    throw DomainError("match_beta: target energy not reachable within the beta bracket", target);
  }
  double mid = 0.0;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double e = thermal_energy(energies, mid);
    if (std::abs(e - target) <= tol * 1e-3 || hi - lo < 1e-15 * beta_max) break;
    if (e > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

double match_beta(const ComplexMatrix& h, double target) {
  return match_beta(linalg::hermitian_eig(h).eigenvalues, target);
}

EnergyShell shell_indices(const RealVector& energies, double upper, double delta) {
  if (!(delta > 0.0)) throw DomainError("shell width must be positive", delta);
  EnergyShell shell{upper, delta, {}};
  const double lower = upper - delta;
  for (Index i = 0; i < energies.size(); ++i) {
    if (energies(i) > lower && energies(i) <= upper) shell.indices.push_back(i);
  }
  if (shell.indices.empty()) {
    Index nearest = 0;
    double best = std::abs(energies(0) - upper);
    for (Index i = 1; i < energies.size(); ++i) {
      const double d = std::min(std::abs(energies(i) - upper), std::abs(energies(i) - lower));
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    std::ostringstream os;
    os << "energy shell (" << lower << ", " << upper << "] is empty; nearest eigenvalue is "
       << energies(nearest);
    throw DomainError(os.str(), energies(nearest));
  }
  return shell;
}

Index default_shell_size(Index dim) {
  return std::max<Index>(20, static_cast<Index>(std::ceil(0.005 * static_cast<double>(dim))));
}

EnergyShell adaptive_shell(const RealVector& energies, double center, Index min_states) {
  const Index n = energies.size();
  if (n == 0) throw DimensionError("adaptive_shell: empty spectrum");
  min_states = std::clamp<Index>(min_states, 1, n);
  // Energies are sorted ascending; start from the level nearest the center.
  Index nearest = 0;
  for (Index i = 1; i < n; ++i) {
    if (std::abs(energies(i) - center) < std::abs(energies(nearest) - center)) nearest = i;
  }
  Index lo = nearest;
  Index hi = nearest;  // inclusive
  const double scale = std::max(1.0, std::abs(energies(n - 1) - energies(0)));
  const double degenerate = 1e-9 * scale;
  auto grow_degenerate = [&]() {
    while (lo > 0 && energies(lo) - energies(lo - 1) <= degenerate) --lo;
    while (hi + 1 < n && energies(hi + 1) - energies(hi) <= degenerate) ++hi;
  };
  grow_degenerate();
  while (hi - lo + 1 < min_states) {
    const bool can_down = lo > 0;
    const bool can_up = hi + 1 < n;
    if (!can_down && !can_up) break;
    if (can_up && (!can_down || std::abs(energies(hi + 1) - center) <= std::abs(energies(lo - 1) - center))) {
      ++hi;
    } else {
      --lo;
    }
    grow_degenerate();
  }
  // Boundaries halfway into the neighbouring gaps.
  const double upper = hi + 1 < n ? 0.5 * (energies(hi) + energies(hi + 1)) : energies(hi) + 0.5 * scale;
  const double lower = lo > 0 ? 0.5 * (energies(lo - 1) + energies(lo)) : energies(lo) - 0.5 * scale;
  return shell_indices(energies, upper, upper - lower);
}

Microcanonical microcanonical_state(const SpectralDecomposition& h_eig, double upper, double delta) {
  EnergyShell shell = shell_indices(h_eig.eigenvalues, upper, delta);
  RealVector p = RealVector::Zero(h_eig.dim());
  const double w = 1.0 / static_cast<double>(shell.indices.size());
  for (Index i : shell.indices) p(i) = w;
  return {DensityMatrix::from_eigensystem(h_eig.eigenvectors, p), std::move(shell)};
}

}  // namespace subeth::ensembles
