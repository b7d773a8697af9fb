#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "subeth/config.hpp"

namespace subeth::runner {

struct RunOutcome {
  /// Invariant violations across all experiments (exit code 2 when > 0).
  int violations = 0;
  std::vector<std::filesystem::path> files;
};

/// Runs cfg.experiments in the fixed order of config::known_experiments()
/// and writes one CSV per experiment plus manifest.json into cfg.output_dir.
/// Progress goes to `log`.
RunOutcome run(const ExperimentConfig& cfg, std::ostream& log);

/// "N,index,energy" rows (ascending energies) for every distinct N in
/// cfg.sizes; with `vectors` non-null also "N,index,component,re,im" rows.
std::string spectrum_csv(const ExperimentConfig& cfg, std::string* vectors = nullptr);

/// CSV headers, fixed column order.
const std::vector<std::string>& csv_header(const std::string& experiment);
std::string csv_file_name(const std::string& experiment);

}  // namespace subeth::runner
