#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "subeth/core.hpp"
#include "subeth/ensembles.hpp"
#include "subeth/experiments.hpp"
#include "subeth/models.hpp"

namespace subeth {

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Everything a run needs. Serialized as JSON; see configs/default.json.
struct ExperimentConfig {
  HamiltonianSpec model;
  std::vector<ScanSize> sizes{{8, 2}, {10, 2}, {12, 2}};
  /// Per-experiment size lists overriding `sizes`.
  std::map<std::string, std::vector<ScanSize>> experiment_sizes;
  EnsembleSpec ensemble;
  SelectionPolicy selection;
  std::vector<std::string> experiments;
  std::map<std::string, double> tolerances;
  std::string output_dir = "results";
  std::uint64_t seed = 20240601;
  /// Largest Hilbert dimension accepted without allow_large.
  std::int64_t memory_cap = 8192;
  bool allow_large = false;
  /// Worker threads for the scans; 0 = hardware concurrency.
  int threads = 1;
  double regularization = 1e-12;
  int audit_random_pairs = 1000;
  std::vector<double> typicality_betas{0.0, 0.2, 1.0};
  std::vector<double> decay_betas{0.0, 0.2};
  std::vector<double> epsilon_grid{0.02, 0.05, 0.1, 0.2, 0.5, 1.0};

  const std::vector<ScanSize>& sizes_for(const std::string& experiment) const;
  /// Named tolerance with the built-in default when not overridden.
  double tolerance(const std::string& name) const;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace config {

/// eth-scan, offdiag-scan, corr-decay, chebyshev, typicality, ensemble-eq, inequality-audit.
const std::vector<std::string>& known_experiments();
const std::map<std::string, double>& default_tolerances();

/// Parses JSON text; each override is "dotted.key=value" with value parsed
/// as JSON when possible and taken as a string otherwise. Unknown keys are
/// rejected.
ExperimentConfig parse(const std::string& text, const std::vector<std::string>& overrides = {});
ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides = {});
std::string serialize(const ExperimentConfig& cfg);

/// Divisibility, memory cap, known experiment names, positive grids.
void validate(const ExperimentConfig& cfg);

/// FNV-1a of the serialized config.
std::uint64_t hash(const ExperimentConfig& cfg);

}  // namespace config
}  // namespace subeth
