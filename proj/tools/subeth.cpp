// Command-line entry point: run experiment suites, one-off divergences,
// spectra and state files.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "subeth/config.hpp"
#include "subeth/divergences.hpp"
#include "subeth/ensembles.hpp"
#include "subeth/io.hpp"
#include "subeth/linalg.hpp"
#include "subeth/models.hpp"
#include "subeth/runner.hpp"
#include "subeth/states.hpp"

namespace {

using namespace subeth;
using json = nlohmann::json;

json num(double x) { return std::isfinite(x) ? json(x) : json(io::format_double(x)); }

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides, bool allow_large,
                             int threads) {
  ExperimentConfig cfg = path.empty() ? config::parse("{}", overrides) : config::load(path, overrides);
  if (allow_large) cfg.allow_large = true;
  if (threads >= 0) cfg.threads = threads;
  return cfg;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const std::vector<std::string>& overrides,
            bool allow_large, int threads) {
  ExperimentConfig cfg = load_config(config_path, overrides, allow_large, threads);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  config::validate(cfg);
  const auto outcome = runner::run(cfg, std::cerr);
  if (outcome.violations > 0) {
    std::cerr << "error: " << outcome.violations << " invariant violation(s); see " << cfg.output_dir
              << "/manifest.json\n";
    return 2;
  }
  return 0;
}

int cmd_divergence(const std::string& path_a, const std::string& path_b, const std::string& measure) {
  const auto a = io::read_state(path_a);
  const auto b = io::read_state(path_b);
  const DensityMatrix rho = io::as_density(b);
  if (a.matrix.rows() != rho.dim()) {
    throw DimensionError("dimension mismatch: " + std::to_string(a.matrix.rows()) + " vs " +
                         std::to_string(rho.dim()));
  }
  json out;
  const bool all = measure == "all";
  const bool needs_density = all || measure == "umegaki" || measure == "bs";
  if (needs_density) {
    const DensityMatrix sigma = io::as_density(a);
    bool regularized = false;
    if (all || measure == "umegaki") {
      const auto s = divergences::umegaki(sigma, rho);
      out["umegaki"] = num(s.value);
      regularized = regularized || s.regularized;
    }
    if (all || measure == "bs") {
      const auto s = divergences::bs_entropy(sigma, rho, 3);
      out["bs"] = num(s.value);
      regularized = regularized || s.regularized;
      if (all) {
        out["bs_form1"] = num(divergences::bs_entropy(sigma, rho, 1).value);
        out["bs_form2"] = num(divergences::bs_entropy(sigma, rho, 2).value);
      }
    }
    out["regularized"] = regularized;
  }
  if (all || measure == "trace") {
    // Both conventions: full Schatten-1 norm and the half-norm distance.
    const double norm = linalg::schatten_norm(a.matrix - rho.matrix(), 1.0);
    out["trace_norm"] = num(norm);
    out["trace_distance"] = num(0.5 * norm);
  }
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_spectrum(const std::string& config_path, const std::string& out_path, const std::string& vectors_path,
                 const std::vector<std::string>& overrides, bool allow_large) {
  const ExperimentConfig cfg = load_config(config_path, overrides, allow_large, -1);
  std::string vectors;
  const std::string csv = runner::spectrum_csv(cfg, vectors_path.empty() ? nullptr : &vectors);
  io::atomic_write(out_path, csv);
  if (!vectors_path.empty()) io::atomic_write(vectors_path, vectors);
  return 0;
}

int cmd_state(const std::string& config_path, const std::vector<std::string>& overrides, int sites, double beta,
              long eigenstate, int block_size, int block, const std::string& out_path) {
  const ExperimentConfig cfg = load_config(config_path, overrides, false, -1);
  LatticeSpec lattice;
  lattice.sites = sites;
  if (static_cast<double>(lattice.full_dim()) > static_cast<double>(cfg.memory_cap)) {
    throw ConfigError("state: N=" + std::to_string(sites) + " exceeds the memory cap");
  }
  const auto eig = linalg::hermitian_eig(models::build_hamiltonian(lattice, cfg.model));
  std::optional<DensityMatrix> rho;
  if (eigenstate >= 0) {
    if (eigenstate >= eig.dim()) throw DomainError("state: eigenstate index out of range", eigenstate);
    rho = states::pure_projector(eig.eigenvectors.col(eigenstate));
  } else {
    rho = ensembles::gibbs_state(eig, beta);
  }
  io::StateFile file;
  if (block_size > 0) {
    const BlockPartition partition(lattice, block_size);
    file.matrix = states::reduce(*rho, partition, block).matrix();
    file.site_dims.assign(static_cast<std::size_t>(block_size), lattice.local_dim);
  } else {
    file.matrix = rho->matrix();
    file.site_dims = lattice.site_dims();
  }
  io::atomic_write(out_path, io::serialize_state(file));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subsystem ETH numerics on translation-invariant spin chains"};
  app.require_subcommand(1);

  std::string config_path, out_dir, out_path, vectors_path, path_a, path_b, measure = "all";
  std::vector<std::string> overrides;
  bool allow_large = false;
  int threads = -1;

  auto* run = app.add_subcommand("run", "Run the experiments named in a config");
  run->add_option("--config", config_path, "Config file (JSON)")->required();
  run->add_option("--out-dir", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--override", overrides, "key=value override, dotted keys (repeatable)");
  run->add_flag("--allow-large", allow_large, "Lift the memory cap");
  run->add_option("--threads", threads, "Worker threads (0 = auto)")->check(CLI::NonNegativeNumber);

  auto* div = app.add_subcommand("divergence", "Divergences between two state files");
  div->add_option("a", path_a, "sigma")->required();
  div->add_option("b", path_b, "rho (reference)")->required();
  div->add_option("--measure", measure, "umegaki | bs | trace | all")
      ->check(CLI::IsMember({"umegaki", "bs", "trace", "all"}));

  auto* spec = app.add_subcommand("spectrum", "Export eigenvalues for every N in the config");
  spec->add_option("--config", config_path, "Config file (JSON); defaults when omitted");
  spec->add_option("--out", out_path, "CSV path")->required();
  spec->add_option("--vectors", vectors_path, "Optional eigenvector CSV path");
  spec->add_option("--override", overrides, "key=value override (repeatable)");
  spec->add_flag("--allow-large", allow_large, "Lift the memory cap");

  int sites = 0, block_size = 0, block = 0;
  double beta = 0.0;
  long eigenstate = -1;
  auto* st = app.add_subcommand("state", "Write a Gibbs state or eigenstate (optionally reduced) as a state file");
  st->add_option("--config", config_path, "Config file for the model; defaults when omitted");
  st->add_option("--override", overrides, "key=value override (repeatable)");
  st->add_option("--sites", sites, "Chain length N")->required();
  st->add_option("--beta", beta, "Inverse temperature of the Gibbs state");
  st->add_option("--eigenstate", eigenstate, "Eigenstate index (ascending energy) instead of a Gibbs state");
  st->add_option("--block-size", block_size, "Reduce onto a block of this many sites");
  st->add_option("--block", block, "Block index for the reduction");
  st->add_option("--out", out_path, "State file path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, overrides, allow_large, threads);
    if (*div) return cmd_divergence(path_a, path_b, measure);
    if (*spec) return cmd_spectrum(config_path, out_path, vectors_path, overrides, allow_large);
    if (*st) return cmd_state(config_path, overrides, sites, beta, eigenstate, block_size, block, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
