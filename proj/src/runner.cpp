#include "subeth/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "subeth/divergences.hpp"
#include "subeth/ensembles.hpp"
#include "subeth/experiments.hpp"
#include "subeth/io.hpp"
#include "subeth/linalg.hpp"
#include "subeth/models.hpp"
#include "subeth/states.hpp"

#ifndef SUBETH_VERSION
#define SUBETH_VERSION "unknown"
#endif

namespace subeth::runner {

namespace {

using json = nlohmann::json;
using experiments::SpectralContext;

std::string fmt(double x) { return io::format_double(x); }
std::string fmt(Index x) { return std::to_string(x); }
std::string fmt(int x) { return std::to_string(x); }
std::string fmt(bool b) { return b ? "1" : "0"; }
std::string fmt(const std::optional<double>& x) { return x ? fmt(*x) : std::string(); }

// JSON has no inf/nan; they are written as strings.
json num(double x) {
  if (std::isfinite(x)) return x;
  return io::format_double(x);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Diagonalized chains shared between experiments, keyed by (N, N_A).
class ContextCache {
 public:
  ContextCache(const HamiltonianSpec& model, std::ostream& log) : model_(model), log_(log) {}

  const SpectralContext& get(const ScanSize& s) {
    auto& slot = cache_[{s.sites, s.block_size}];
    if (!slot) {
      const auto t0 = std::chrono::steady_clock::now();
      LatticeSpec lattice;
      lattice.sites = s.sites;
      slot = std::make_unique<SpectralContext>(lattice, model_, s.block_size);
      log_ << "  diagonalized N=" << s.sites << " (dim " << slot->dim() << ", " << seconds_since(t0) << " s)\n";
    }
    return *slot;
  }

 private:
  HamiltonianSpec model_;
  std::ostream& log_;
  std::map<std::pair<int, int>, std::unique_ptr<SpectralContext>> cache_;
};

struct ExperimentResult {
  std::string csv;
  int violations = 0;
  int regularized = 0;
  json informational = json::object();
  json fits = json::array();
};

const std::map<std::string, std::vector<std::string>>& headers() {
  static const std::map<std::string, std::vector<std::string>> h{
      {"eth-scan",
       {"N", "N_A", "C", "i", "E_i", "beta", "status", "trace_distance", "trace_norm", "bs_entropy",
        "variance_total", "variance_local", "variance_cross", "variance_block", "variance_ratio", "block_spread",
        "regularized"}},
      {"offdiag-scan",
       {"N", "N_A", "C", "i", "j", "E_i", "E_j", "beta", "status", "trace_norm", "variance_total", "variance_local",
        "variance_cross", "variance_block", "variance_ratio", "hoelder_slack", "regularized"}},
      {"corr-decay", {"N", "N_A", "beta", "block_k", "block_l", "distance", "corr_norm", "mutual_info"}},
      {"chebyshev", {"N", "N_A", "state", "beta", "form", "observable", "epsilon", "empirical", "bound", "violated"}},
      {"typicality",
       {"N", "N_A", "beta", "v_dg", "v_off", "basis_side", "basis_side_swapped", "global_side", "identity_residual",
        "global_residual", "local_combination_residual", "orthogonality_residual", "conversion_residual_diag",
        "conversion_residual_off", "regularized"}},
      {"ensemble-eq",
       {"N", "N_A", "shell_upper", "shell_width", "shell_states", "mean_energy", "beta", "lhs", "lhs_half",
        "convexity_middle", "rhs", "margin", "regularized"}},
      {"inequality-audit",
       {"source", "index", "N", "N_A", "dim", "kind", "umegaki", "bs_form1", "bs_form2", "bs_form3", "trace_norm",
        "trace_distance", "variance", "pinsker_slack", "bs_vs_umegaki_slack", "hoelder_slack", "pullup_residual",
        "regularized"}},
  };
  return h;
}

std::string header_line(const std::string& experiment) { return io::csv_line(csv_header(experiment)); }

// Median of a size group against N, for the scaling summary.
json median_fit(const std::map<int, std::map<int, std::vector<double>>>& by_block, const std::string& quantity) {
  json out = json::array();
  for (const auto& [block_size, by_n] : by_block) {
    std::vector<double> ns, medians;
    for (const auto& [n, values] : by_n) {
      if (values.empty()) continue;
      ns.push_back(n);
      medians.push_back(experiments::median(values));
    }
    json entry{{"quantity", quantity}, {"N_A", block_size}, {"N", ns}, {"median", json::array()}};
    for (double m : medians) entry["median"].push_back(num(m));
    bool decreasing = ns.size() >= 2;
    for (std::size_t t = 1; t < medians.size(); ++t) decreasing = decreasing && medians[t] < medians[t - 1];
    entry["strictly_decreasing"] = decreasing;
    const bool fittable = ns.size() >= 2 && std::all_of(medians.begin(), medians.end(), [](double m) { return m > 0; });
    if (fittable) {
      const auto fit = experiments::fit_power_law(ns, medians);
      entry["exponent"] = num(fit.exponent);
      entry["intercept"] = num(fit.intercept);
      entry["half_width"] = num(fit.half_width);
    }
    out.push_back(entry);
  }
  return out;
}

ExperimentResult run_eth_scan(const ExperimentConfig& cfg, ContextCache& cache) {
  ExperimentResult res;
  res.csv = header_line("eth-scan");
  const double tol = cfg.tolerance("identity");
  int pinsker_failures = 0;
  std::map<int, std::map<int, std::vector<double>>> medians;
  for (const auto& s : cfg.sizes_for("eth-scan")) {
    const auto& ctx = cache.get(s);
    const auto records = experiments::eigenstate_scan(ctx, cfg.selection, cfg.threads, cfg.regularization);
    for (const auto& r : records) {
      res.csv += io::csv_line({fmt(r.sites), fmt(r.block_size), fmt(r.block_count), fmt(r.i), fmt(r.energy_i),
                               fmt(r.beta), r.status, fmt(r.trace_distance), fmt(r.trace_norm), fmt(r.bs_entropy),
                               fmt(r.variance_total), fmt(r.variance_local), fmt(r.variance_cross),
                               fmt(r.variance_block), fmt(r.variance_ratio), fmt(r.block_spread),
                               fmt(r.regularized)});
      if (r.status != record_status::kOk) continue;
      res.regularized += r.regularized ? 1 : 0;
      medians[r.block_size][r.sites].push_back(r.trace_distance);
      // Decomposition, Hoelder on the block copy, and the Pinsker-type bound
      // S_BS >= 0.5 ||.||_1^2 (via S_BS >= S >= 0.5 ||.||_1^2).
      const double scale = std::max(1.0, std::abs(r.variance_total));
      if (std::abs(r.variance_total - r.variance_local - r.variance_cross) > tol * scale) ++res.violations;
      if (std::abs(r.variance_local - r.variance_block / r.block_count) > tol * scale) ++res.violations;
      if (r.variance_block - r.trace_norm * r.trace_norm < -tol) ++res.violations;
      if (r.bs_entropy - 0.5 * r.trace_norm * r.trace_norm < -tol) {
        ++res.violations;
        ++pinsker_failures;
      }
    }
  }
  res.informational["bs_pinsker_failures"] = pinsker_failures;
  res.fits = median_fit(medians, "median_trace_distance");
  return res;
}

ExperimentResult run_offdiag_scan(const ExperimentConfig& cfg, ContextCache& cache) {
  ExperimentResult res;
  res.csv = header_line("offdiag-scan");
  const double tol = cfg.tolerance("identity");
  int total_exceedances = 0;
  std::map<int, std::map<int, std::vector<double>>> medians;
  for (const auto& s : cfg.sizes_for("offdiag-scan")) {
    const auto& ctx = cache.get(s);
    const auto records = experiments::eigenpair_scan(ctx, cfg.selection, cfg.threads, cfg.regularization);
    for (const auto& r : records) {
      const double slack = r.variance_block - r.trace_norm * r.trace_norm;
      res.csv += io::csv_line({fmt(r.sites), fmt(r.block_size), fmt(r.block_count), fmt(r.i), fmt(r.j),
                               fmt(r.energy_i), fmt(r.energy_j), fmt(r.beta), r.status, fmt(r.trace_norm),
                               fmt(r.variance_total), fmt(r.variance_local), fmt(r.variance_cross),
                               fmt(r.variance_block), fmt(r.variance_ratio), fmt(slack), fmt(r.regularized)});
      if (r.status != record_status::kOk) continue;
      res.regularized += r.regularized ? 1 : 0;
      medians[r.block_size][r.sites].push_back(r.trace_norm);
      const double scale = std::max(1.0, std::abs(r.variance_total));
      if (std::abs(r.variance_total - r.variance_local - r.variance_cross) > tol * scale) ++res.violations;
      if (std::abs(r.variance_local - r.variance_block / r.block_count) > tol * scale) ++res.violations;
      if (slack < -tol) ++res.violations;
      if (r.variance_total < r.trace_norm * r.trace_norm) ++total_exceedances;
    }
  }
  // ||sigma^{ij}||_1^2 against the full averaged-observable variance: not a
  // bound, counted for reference.
  res.informational["total_variance_hoelder_exceedances"] = total_exceedances;
  res.fits = median_fit(medians, "median_trace_norm");
  return res;
}

ExperimentResult run_corr_decay(const ExperimentConfig& cfg, ContextCache& cache, std::ostream& log) {
  ExperimentResult res;
  res.csv = header_line("corr-decay");
  const double zero_tol = cfg.tolerance("decay_zero");
  for (const auto& s : cfg.sizes_for("corr-decay")) {
    if (s.sites / s.block_size < 3) {
      log << "  corr-decay: N=" << s.sites << ", N_A=" << s.block_size << " has fewer than 3 blocks, skipped\n";
      continue;
    }
    const auto& ctx = cache.get(s);
    for (double beta : cfg.decay_betas) {
      const RealVector w = ensembles::gibbs_weights(ctx.eig().eigenvalues, beta);
      const auto probe = experiments::correlation_decay_probe(ctx.marginals(w), ctx.partition());
      for (const auto& d : probe.records) {
        res.csv += io::csv_line({fmt(s.sites), fmt(s.block_size), fmt(beta), fmt(d.block_k), fmt(d.block_l),
                                 fmt(d.distance), fmt(d.corr_norm), fmt(d.mutual_info)});
        // The infinite-temperature state is a product state.
        if (beta == 0.0 && d.corr_norm > zero_tol) ++res.violations;
      }
      std::map<int, std::vector<double>> by_distance;
      for (const auto& d : probe.records) by_distance[d.distance].push_back(d.corr_norm);
      json distances = json::array(), means = json::array();
      bool monotone = true;
      double previous = linalg::kInfinity;
      for (const auto& [dist, values] : by_distance) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        distances.push_back(dist);
        means.push_back(num(mean));
        monotone = monotone && mean <= previous + zero_tol;
        previous = mean;
      }
      res.fits.push_back({{"N", s.sites},
                          {"N_A", s.block_size},
                          {"beta", beta},
                          {"distance", distances},
                          {"mean_corr_norm", means},
                          {"monotone", monotone},
                          {"better_model", probe.fit.better_model},
                          {"points", probe.fit.points},
                          {"xi", num(probe.fit.xi)},
                          {"exp_residual", num(probe.fit.exp_residual)},
                          {"gamma", num(probe.fit.gamma)},
                          {"alg_residual", num(probe.fit.alg_residual)}});
    }
  }
  return res;
}

ComplexMatrix random_hermitian(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix a(dim, dim);
  for (Index r = 0; r < dim; ++r) {
    for (Index c = 0; c < dim; ++c) a(r, c) = Complex(normal(rng), normal(rng));
  }
  return 0.5 * (a + a.adjoint());
}

// (1/N) sum_i P_i for a single-site Pauli P.
ComplexMatrix magnetization(const LatticeSpec& lattice, const ComplexMatrix& pauli) {
  const auto dims = lattice.site_dims();
  ComplexMatrix m = ComplexMatrix::Zero(lattice.full_dim(), lattice.full_dim());
  for (int i = 0; i < lattice.sites; ++i) {
    const int site[] = {i};
    m += linalg::embed(pauli, dims, site);
  }
  return m / static_cast<double>(lattice.sites);
}

// Shell around `center`: the configured width when one is given, otherwise adaptive.
EnergyShell make_shell(const ExperimentConfig& cfg, const RealVector& energies, double center) {
  if (cfg.ensemble.kind == EnsembleSpec::Kind::kMicrocanonical && cfg.ensemble.delta > 0.0 &&
      cfg.ensemble.energy_center) {
    return ensembles::shell_indices(energies, *cfg.ensemble.energy_center, cfg.ensemble.delta);
  }
  const Index dim = energies.size();
  const auto by_fraction = static_cast<Index>(std::ceil(cfg.selection.shell_fraction * static_cast<double>(dim)));
  const Index size = std::min(dim, std::max<Index>(cfg.selection.shell_min_states, by_fraction));
  return ensembles::adaptive_shell(energies, center, size);
}

double default_center(const ExperimentConfig& cfg, const RealVector& energies) {
  if (cfg.ensemble.energy_center) return *cfg.ensemble.energy_center;
  return energies(energies.size() / 2);
}

ExperimentResult run_chebyshev(const ExperimentConfig& cfg, ContextCache& cache) {
  ExperimentResult res;
  res.csv = header_line("chebyshev");
  std::mt19937_64 rng(cfg.seed ^ 0xc3b5ULL);
  for (const auto& s : cfg.sizes_for("chebyshev")) {
    const auto& ctx = cache.get(s);
    const auto& eig = ctx.eig();
    const auto& energies = eig.eigenvalues;
    const auto& lattice = ctx.lattice();

    ComplexMatrix pauli_z = ComplexMatrix::Zero(2, 2), pauli_x = ComplexMatrix::Zero(2, 2);
    pauli_z(0, 0) = 1.0;
    pauli_z(1, 1) = -1.0;
    pauli_x(0, 1) = pauli_x(1, 0) = 1.0;
    ComplexMatrix block_op = random_hermitian(ctx.partition().block_dim(), rng);
    block_op /= linalg::schatten_norm(block_op, linalg::kInfinity);
    ComplexMatrix block_avg = ComplexMatrix::Zero(ctx.dim(), ctx.dim());
    for (int k = 0; k < ctx.block_count(); ++k) {
      block_avg += linalg::embed(block_op, lattice.site_dims(), ctx.partition().sites(k));
    }
    block_avg /= static_cast<double>(ctx.block_count());
    const std::vector<std::pair<std::string, ComplexMatrix>> observables{
        {"magnetization_z", magnetization(lattice, pauli_z)},
        {"magnetization_x", magnetization(lattice, pauli_x)},
        {"block_random", block_avg}};

    const EnergyShell shell = make_shell(cfg, energies, default_center(cfg, energies));
    const auto d = static_cast<Index>(shell.indices.size());
    ComplexMatrix shell_basis(ctx.dim(), d);
    double mean_energy = 0.0;
    RealVector w_mc = RealVector::Zero(ctx.dim());
    for (Index t = 0; t < d; ++t) {
      const Index i = shell.indices[static_cast<std::size_t>(t)];
      shell_basis.col(t) = eig.eigenvectors.col(i);
      w_mc(i) = 1.0 / static_cast<double>(d);
      mean_energy += energies(i) / static_cast<double>(d);
    }
    const RealVector flat = RealVector::Constant(d, 1.0 / static_cast<double>(d));
    const DensityMatrix rho_mc = DensityMatrix::from_eigensystem(eig.eigenvectors, w_mc);
    const double beta = ensembles::match_beta(energies, mean_energy);
    const RealVector w_c = ensembles::gibbs_weights(energies, beta);
    const DensityMatrix rho_c = DensityMatrix::from_eigensystem(eig.eigenvectors, w_c);

    auto emit = [&](const std::string& state, const std::vector<ChebyshevRow>& rows) {
      for (const auto& r : rows) {
        res.csv += io::csv_line({fmt(s.sites), fmt(s.block_size), state, fmt(beta), r.form, r.observable,
                                 fmt(r.epsilon), fmt(r.empirical), fmt(r.bound), fmt(r.violated)});
        if (r.violated) ++res.violations;
      }
    };
    for (const auto& [label, op] : observables) {
      emit("microcanonical",
           experiments::chebyshev_concentration(rho_mc, shell_basis, flat, op, cfg.epsilon_grid, label));
      emit("canonical",
           experiments::chebyshev_concentration(rho_c, eig.eigenvectors, w_c, op, cfg.epsilon_grid, label));
    }
    if (ctx.block_count() >= 1) {
      emit("microcanonical", experiments::averaged_chebyshev(rho_mc, ctx.partition(), eig.eigenvectors, w_mc,
                                                             cfg.epsilon_grid, cfg.regularization));
    }
  }
  return res;
}

ExperimentResult run_typicality(const ExperimentConfig& cfg, ContextCache& cache) {
  ExperimentResult res;
  res.csv = header_line("typicality");
  const double tol = cfg.tolerance("typicality");
  const double id_tol = cfg.tolerance("identity");
  int swapped_mismatch = 0;
  std::uint64_t stream = 0;
  for (const auto& s : cfg.sizes_for("typicality")) {
    const auto& ctx = cache.get(s);
    const auto& eig = ctx.eig();
    for (double beta : cfg.typicality_betas) {
      const RealVector w = ensembles::gibbs_weights(eig.eigenvalues, beta);
      const DensityMatrix rho = DensityMatrix::from_eigensystem(eig.eigenvectors, w);
      const auto r = experiments::typicality_balance(rho, ctx.partition(), eig.eigenvectors, w,
                                                     cfg.seed + (++stream), cfg.regularization);
      res.csv += io::csv_line({fmt(s.sites), fmt(s.block_size), fmt(beta), fmt(r.v_dg), fmt(r.v_off),
                               fmt(r.basis_side), fmt(r.basis_side_swapped), fmt(r.global_side),
                               fmt(r.identity_residual), fmt(r.global_residual),
                               fmt(r.local_combination_residual), fmt(r.orthogonality_residual),
                               fmt(r.conversion_residual_diag), fmt(r.conversion_residual_off),
                               fmt(r.regularized)});
      res.regularized += r.regularized ? 1 : 0;
      const double scale = std::max(1.0, std::abs(r.basis_side));
      if (r.identity_residual > tol * scale) ++res.violations;
      if (r.global_residual > tol * scale) ++res.violations;
      if (r.local_combination_residual > tol * scale) ++res.violations;
      if (r.orthogonality_residual > id_tol) ++res.violations;
      if (r.conversion_residual_diag > tol || r.conversion_residual_off > tol) ++res.violations;
      if (std::abs(r.basis_side_swapped - r.basis_side) > tol * scale) ++swapped_mismatch;
    }
  }
  res.informational["swapped_weight_mismatches"] = swapped_mismatch;
  return res;
}

ExperimentResult run_ensemble_eq(const ExperimentConfig& cfg, ContextCache& cache) {
  ExperimentResult res;
  res.csv = header_line("ensemble-eq");
  const double tol = cfg.tolerance("identity");
  for (const auto& s : cfg.sizes_for("ensemble-eq")) {
    const auto& ctx = cache.get(s);
    const auto& energies = ctx.eig().eigenvalues;
    std::vector<double> centers;
    if (cfg.ensemble.kind == EnsembleSpec::Kind::kMicrocanonical && cfg.ensemble.energy_center) {
      centers.push_back(*cfg.ensemble.energy_center);
    } else {
      const auto window = experiments::select_window(ctx.dim(), cfg.selection);
      centers = {energies(window.front()), energies(window[window.size() / 2]), energies(window.back())};
    }
    for (double center : centers) {
      const auto r = experiments::ensemble_equivalence(ctx, make_shell(cfg, energies, center), cfg.regularization);
      res.csv += io::csv_line({fmt(r.sites), fmt(r.block_size), fmt(r.shell_upper), fmt(r.shell_width),
                               fmt(r.shell_states), fmt(r.mean_energy), fmt(r.beta), fmt(r.lhs), fmt(r.lhs_half),
                               fmt(r.convexity_middle), fmt(r.rhs), fmt(r.margin), fmt(r.regularized)});
      res.regularized += r.regularized ? 1 : 0;
      if (r.lhs > r.convexity_middle + tol || r.convexity_middle > r.rhs + tol) ++res.violations;
    }
  }
  return res;
}

// Random full-rank state from a complex Ginibre matrix.
ComplexMatrix random_density(Index dim, Index rank, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexMatrix g(dim, rank);
  for (Index r = 0; r < dim; ++r) {
    for (Index c = 0; c < rank; ++c) g(r, c) = Complex(normal(rng), normal(rng));
  }
  ComplexMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return 0.5 * (rho + rho.adjoint());
}

// Tr_aux |u><w| for orthonormal u, w in C^dim (x) C^2.
ComplexMatrix random_transition(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexVector u(2 * dim), w(2 * dim);
  for (Index t = 0; t < 2 * dim; ++t) {
    u(t) = Complex(normal(rng), normal(rng));
    w(t) = Complex(normal(rng), normal(rng));
  }
  u.normalize();
  w -= u.dot(w) * u;
  w.normalize();
  ComplexMatrix sigma = ComplexMatrix::Zero(dim, dim);
  for (Index a = 0; a < dim; ++a) {
    for (Index b = 0; b < dim; ++b) {
      for (Index aux = 0; aux < 2; ++aux) sigma(a, b) += u(2 * a + aux) * std::conj(w(2 * b + aux));
    }
  }
  return sigma;
}

struct AuditRow {
  std::string source;
  Index index = 0;
  int sites = 0;
  int block_size = 0;
  Index dim = 0;
  std::string kind;
  DivergenceReport report;
};

ExperimentResult run_inequality_audit(const ExperimentConfig& cfg, ContextCache& cache) {
  ExperimentResult res;
  res.csv = header_line("inequality-audit");
  const double tol = cfg.tolerance("identity");
  const double pullup_tol = cfg.tolerance("pullup");
  auto emit = [&](const AuditRow& row) {
    const auto& r = row.report;
    const bool model = row.sites > 0;
    res.csv += io::csv_line({row.source, fmt(row.index), model ? fmt(row.sites) : "", model ? fmt(row.block_size) : "",
                             fmt(row.dim), row.kind,
                             fmt(r.umegaki), fmt(r.bs_form1), fmt(r.bs_form2), fmt(r.bs_form3), fmt(r.trace_norm),
                             fmt(r.trace_distance), fmt(r.variance), fmt(r.pinsker_slack),
                             fmt(r.bs_vs_umegaki_slack), fmt(r.hoelder_slack), fmt(r.pullup_residual),
                             fmt(r.regularization_flag)});
    res.regularized += r.regularization_flag ? 1 : 0;
    if (r.min_slack() < -tol) ++res.violations;
    if (r.max_form_disagreement() > tol) ++res.violations;
    if (r.pullup_residual && *r.pullup_residual > pullup_tol) ++res.violations;
  };

  std::mt19937_64 rng(cfg.seed);
  for (int t = 0; t < cfg.audit_random_pairs; ++t) {
    const Index dim = 2 + static_cast<Index>(rng() % 7);
    const bool diagonal = t % 2 == 0;
    const DensityMatrix rho(random_density(dim, dim, rng));
    AuditRow row{"random", t, 0, 0, dim, diagonal ? "diagonal" : "offdiagonal", {}};
    if (diagonal) {
      const Index rank = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(dim));
      row.report = experiments::inequality_audit(DensityMatrix(random_density(dim, rank, rng)), rho,
                                                 cfg.regularization);
    } else {
      row.report = experiments::inequality_audit(TransitionMatrix{random_transition(dim, rng), 0, 1}, rho,
                                                 cfg.regularization);
    }
    emit(row);
  }

  for (const auto& s : cfg.sizes_for("inequality-audit")) {
    if (s.sites == s.block_size) continue;
    const auto& ctx = cache.get(s);
    const auto& eig = ctx.eig();
    const auto window = experiments::select_window(ctx.dim(), cfg.selection);
    const bool with_pullup = ctx.dim() <= 1024;
    for (std::size_t t = 0; t < window.size(); ++t) {
      const Index i = window[t];
      const double beta = ensembles::match_beta(eig.eigenvalues, eig.eigenvalues(i));
      const RealVector w = ensembles::gibbs_weights(eig.eigenvalues, beta);
      const DensityMatrix sigma(ctx.single(i));
      AuditRow row{"model", i, s.sites, s.block_size, ctx.partition().block_dim(), "diagonal", {}};
      if (with_pullup) {
        const DensityMatrix global = DensityMatrix::from_eigensystem(eig.eigenvectors, w);
        row.report = experiments::inequality_audit(sigma, global, ctx.partition(), cfg.regularization);
      } else {
        row.report = experiments::inequality_audit(sigma, DensityMatrix(ctx.block_marginal(w)), cfg.regularization);
      }
      emit(row);
      if (t + 1 < window.size()) {
        const Index j = window[t + 1];
        AuditRow off{"model", i, s.sites, s.block_size, ctx.partition().block_dim(), "offdiagonal", {}};
        const double beta_ij = ensembles::match_beta(eig.eigenvalues, 0.5 * (eig.eigenvalues(i) + eig.eigenvalues(j)));
        const DensityMatrix rho_ij(ctx.block_marginal(ensembles::gibbs_weights(eig.eigenvalues, beta_ij)));
        off.report = experiments::inequality_audit(TransitionMatrix{ctx.reduce_pair(i, j, 0), i, j}, rho_ij,
                                                   cfg.regularization);
        emit(off);
      }
    }
  }
  return res;
}

}  // namespace

const std::vector<std::string>& csv_header(const std::string& experiment) {
  const auto it = headers().find(experiment);
  if (it == headers().end()) throw ConfigError("unknown experiment '" + experiment + "'");
  return it->second;
}

std::string csv_file_name(const std::string& experiment) {
  static const std::map<std::string, std::string> names{
      {"eth-scan", "eth_scan.csv"},           {"offdiag-scan", "offdiag_scan.csv"},
      {"corr-decay", "corr_decay.csv"},       {"chebyshev", "chebyshev.csv"},
      {"typicality", "typicality.csv"},       {"ensemble-eq", "ensemble_eq.csv"},
      {"inequality-audit", "inequality_audit.csv"}};
  const auto it = names.find(experiment);
  if (it == names.end()) throw ConfigError("unknown experiment '" + experiment + "'");
  return it->second;
}

RunOutcome run(const ExperimentConfig& cfg, std::ostream& log) {
  config::validate(cfg);
  const std::filesystem::path out_dir(cfg.output_dir);
  std::filesystem::create_directories(out_dir);

  ContextCache cache(cfg.model, log);
  RunOutcome outcome;
  json manifest;
  std::ostringstream hash;
  hash << std::hex << config::hash(cfg);
  manifest["config_hash"] = hash.str();
  manifest["version"] = SUBETH_VERSION;
  manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);
  manifest["compiler"] = __VERSION__;
  manifest["config"] = json::parse(config::serialize(cfg));
  json wall = json::object(), violations = json::object(), informational = json::object(), fits = json::object();
  json files = json::array();
  int regularized = 0;

  for (const auto& name : config::known_experiments()) {
    if (std::find(cfg.experiments.begin(), cfg.experiments.end(), name) == cfg.experiments.end()) continue;
    log << name << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult r;
    if (name == "eth-scan") r = run_eth_scan(cfg, cache);
    else if (name == "offdiag-scan") r = run_offdiag_scan(cfg, cache);
    else if (name == "corr-decay") r = run_corr_decay(cfg, cache, log);
    else if (name == "chebyshev") r = run_chebyshev(cfg, cache);
    else if (name == "typicality") r = run_typicality(cfg, cache);
    else if (name == "ensemble-eq") r = run_ensemble_eq(cfg, cache);
    else r = run_inequality_audit(cfg, cache);
    const double elapsed = seconds_since(t0);

    const auto path = out_dir / csv_file_name(name);
    io::atomic_write(path, r.csv);
    outcome.files.push_back(path);
    outcome.violations += r.violations;
    regularized += r.regularized;
    wall[name] = elapsed;
    violations[name] = r.violations;
    if (!r.informational.empty()) informational[name] = r.informational;
    if (!r.fits.empty()) fits[name] = r.fits;
    files.push_back(path.filename().string());
    log << "  " << path.filename().string() << ": " << r.violations << " violation(s), " << elapsed << " s\n";
  }

  manifest["wall_time_seconds"] = wall;
  manifest["violations"] = violations;
  manifest["total_violations"] = outcome.violations;
  manifest["regularization_incidents"] = regularized;
  manifest["informational"] = informational;
  manifest["fits"] = fits;
  manifest["files"] = files;
  const auto manifest_path = out_dir / "manifest.json";
  io::atomic_write(manifest_path, manifest.dump(2) + "\n");
  outcome.files.push_back(manifest_path);
  return outcome;
}

std::string spectrum_csv(const ExperimentConfig& cfg, std::string* vectors) {
  std::set<int> sites;
  for (const auto& s : cfg.sizes) sites.insert(s.sites);
  std::string out = io::csv_line({"N", "index", "energy"});
  if (vectors) *vectors = io::csv_line({"N", "index", "component", "re", "im"});
  for (int n : sites) {
    LatticeSpec lattice;
    lattice.sites = n;
    if (n < 2) throw ConfigError("spectrum: N must be >= 2");
    if (!cfg.allow_large && static_cast<double>(lattice.full_dim()) > static_cast<double>(cfg.memory_cap)) {
      throw ConfigError("spectrum: N=" + std::to_string(n) + " exceeds the memory cap (use --allow-large)");
    }
    const auto eig = linalg::hermitian_eig(models::build_hamiltonian(lattice, cfg.model));
    for (Index i = 0; i < eig.dim(); ++i) {
      out += io::csv_line({fmt(n), fmt(i), fmt(eig.eigenvalues(i))});
      if (!vectors) continue;
      for (Index c = 0; c < eig.dim(); ++c) {
        const Complex v = eig.eigenvectors(c, i);
        *vectors += io::csv_line({fmt(n), fmt(i), fmt(c), fmt(v.real()), fmt(v.imag())});
      }
    }
  }
  return out;
}

}  // namespace subeth::runner
