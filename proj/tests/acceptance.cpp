// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--known-failure K]...
//
// Exit status is 0 when every criterion passes or fails only where listed
// with --known-failure; the FAIL line is printed either way.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "subeth/config.hpp"
#include "subeth/divergences.hpp"
#include "subeth/ensembles.hpp"
#include "subeth/experiments.hpp"
#include "subeth/io.hpp"
#include "subeth/linalg.hpp"
#include "subeth/models.hpp"
#include "subeth/runner.hpp"
#include "support.hpp"

using namespace subeth;
using namespace testing_support;
namespace dv = subeth::divergences;
namespace ex = subeth::experiments;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

LatticeSpec chain(int n, int local_dim = 2) {
  LatticeSpec l;
  l.sites = n;
  l.local_dim = local_dim;
  return l;
}

// Tr_aux |u><w| for orthonormal u, w on C^d (x) C^2.
ComplexMatrix random_transition(Gen& gen, Index d) {
  const ComplexVector u = gen.unit(2 * d);
  ComplexVector w = gen.unit(2 * d);
  w -= u.dot(w) * u;
  w.normalize();
  ComplexMatrix s = ComplexMatrix::Zero(d, d);
  for (Index a = 0; a < d; ++a) {
    for (Index b = 0; b < d; ++b) s(a, b) = u(2 * a) * std::conj(w(2 * b)) + u(2 * a + 1) * std::conj(w(2 * b + 1));
  }
  return s;
}

// Chain contexts and scans shared by criteria 4, 9 and 10.
struct SharedScan {
  std::map<int, std::unique_ptr<ex::SpectralContext>> contexts;
  std::map<int, std::vector<ScalingRecord>> diagonal, offdiagonal;
  double seconds = 0.0;
};

SharedScan& shared_scan() {
  static SharedScan scan = [] {
    SharedScan s;
    const auto t0 = Clock::now();
    for (int n : {8, 10, 12}) {
      auto ctx = std::make_unique<ex::SpectralContext>(chain(n), HamiltonianSpec{}, 2);
      s.diagonal[n] = ex::eigenstate_scan(*ctx, SelectionPolicy{}, 0);
      s.offdiagonal[n] = ex::eigenpair_scan(*ctx, SelectionPolicy{}, 0);
      s.contexts[n] = std::move(ctx);
    }
    s.seconds = since(t0);
    return s;
  }();
  return scan;
}

Outcome criterion_1() {
  const auto t0 = Clock::now();
  Gen gen(1001);
  int violations = 0;
  double worst_forms = 0.0, worst_slack = 0.0;
  const int pairs = 1000;
  for (int t = 0; t < pairs; ++t) {
    const Index d = gen.integer(2, 8);
    const DensityMatrix rho(gen.density(d));
    const DensityMatrix sigma(gen.density(d, gen.integer(1, static_cast<int>(d))));
    const auto r = dv::divergence_report(sigma, rho);
    const double forms = r.max_form_disagreement();
    const double slack = std::min(*r.bs_vs_umegaki_slack, *r.pinsker_slack);
    worst_forms = std::max(worst_forms, forms);
    worst_slack = std::min(worst_slack, slack);
    if (forms > 1e-8 || slack < -1e-8) ++violations;
  }
  const double secs = since(t0);
  return {violations == 0 && secs < 60.0,
          std::to_string(pairs) + " pairs, " + std::to_string(violations) + " violations, max form gap " +
              fmt("%.2e", worst_forms) + ", min slack " + fmt("%.2e", worst_slack) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome criterion_2() {
  const auto t0 = Clock::now();
  Gen gen(1002);
  int violations = 0, instances = 0;
  double min_diag = 1e300, min_off = 1e300;
  for (int t = 0; t < 600; ++t) {
    // Two-block layouts of total dimension 4, 9 or 16.
    const int layout = t % 4;
    const LatticeSpec lattice = layout == 3 ? chain(4) : chain(2, 2 + layout);
    const BlockPartition p(lattice, layout == 3 ? 2 : 1);
    const Index db = p.block_dim();
    const DensityMatrix rho_b(gen.density(lattice.full_dim()));
    const DensityMatrix rho_1 = states::reduce(rho_b, p, 0);
    const auto dims = lattice.site_dims();

    const DensityMatrix sigma(gen.density(db, gen.integer(1, static_cast<int>(db))));
    const auto o = dv::formal_observable(rho_1, sigma);
    const double v = dv::quantum_variance(rho_b, linalg::embed(o.matrix, dims, p.sites(0)));
    const double slack = v - std::pow(linalg::schatten_norm(sigma.matrix() - rho_1.matrix(), 1.0), 2);

    const ComplexMatrix sij = random_transition(gen, db);
    const auto oij = dv::formal_observable(rho_1, TransitionMatrix{sij, 0, 1});
    const double vij = dv::quantum_variance(rho_b, linalg::embed(oij.matrix, dims, p.sites(0)));
    const double slack_ij = vij - std::pow(linalg::schatten_norm(sij, 1.0), 2);

    min_diag = std::min(min_diag, slack);
    min_off = std::min(min_off, slack_ij);
    if (slack < -1e-8) ++violations;
    if (slack_ij < -1e-8) ++violations;
    ++instances;
  }
  const double secs = since(t0);
  return {violations == 0 && secs < 60.0,
          std::to_string(instances) + " instances (diagonal + off-diagonal each), " + std::to_string(violations) +
              " violations, min slacks " + fmt("%.2e", min_diag) + " / " + fmt("%.2e", min_off) + ", " +
              fmt("%.1f", secs) + " s"};
}

Outcome criterion_3() {
  const auto t0 = Clock::now();
  Gen gen(1003);
  int violations = 0;
  double worst_trace = 0.0, worst_psd = 0.0, worst_pullup = 0.0;
  const int instances = 200;
  for (int t = 0; t < instances; ++t) {
    const int block_size = 1 + t % 2;
    int n = block_size * gen.integer(2, block_size == 1 ? 6 : 3);
    if (t % 25 == 0) n = 8;
    const LatticeSpec lattice = chain(n);
    HamiltonianSpec spec;
    spec.couplings = {{"J", gen.uniform(0.5, 1.5)}, {"g", gen.uniform(0.3, 1.5)}, {"h", gen.uniform(-1.0, 1.0)}};
    const DensityMatrix rho = ensembles::gibbs_state(models::build_hamiltonian(lattice, spec), gen.uniform(0.1, 1.5));
    const BlockPartition p(lattice, block_size);
    const int block = gen.integer(0, p.block_count() - 1);
    const DensityMatrix sigma(gen.density(p.block_dim(), gen.integer(1, static_cast<int>(p.block_dim()))));
    const ComplexMatrix rec = dv::petz_recovery(rho, p, block, sigma);
    const double trace_err = std::abs(rec.trace().real() - 1.0);
    const double min_eig = linalg::hermitian_eig(0.5 * (rec + rec.adjoint())).eigenvalues.minCoeff();
    const double pullup = dv::pullup_identity_residual(rho, p, block, sigma);
    worst_trace = std::max(worst_trace, trace_err);
    worst_psd = std::min(worst_psd, min_eig);
    worst_pullup = std::max(worst_pullup, pullup);
    if (trace_err > 1e-8 || min_eig < -1e-8 || pullup > 1e-6) ++violations;
  }
  const double secs = since(t0);
  return {violations == 0 && secs < 120.0,
          std::to_string(instances) + " Gibbs instances, " + std::to_string(violations) + " violations, max |Tr-1| " +
              fmt("%.1e", worst_trace) + ", min eig " + fmt("%.1e", worst_psd) + ", max pull-up residual " +
              fmt("%.1e", worst_pullup) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome criterion_4() {
  auto& scan = shared_scan();
  int records = 0, violations = 0;
  double worst_sum = 0.0, worst_local = 0.0;
  auto audit = [&](const ScalingRecord& r) {
    if (r.status != record_status::kOk) return;
    ++records;
    const double sum = std::abs(r.variance_total - r.variance_local - r.variance_cross);
    const double local = std::abs(r.variance_local - r.variance_block / r.block_count);
    worst_sum = std::max(worst_sum, sum);
    worst_local = std::max(worst_local, local);
    if (sum > 1e-8 || local > 1e-8) ++violations;
  };
  for (auto& [n, recs] : scan.diagonal) std::for_each(recs.begin(), recs.end(), audit);
  for (auto& [n, recs] : scan.offdiagonal) std::for_each(recs.begin(), recs.end(), audit);
  return {records > 0 && violations == 0,
          std::to_string(records) + " records (N = 8, 10, 12, diagonal and off-diagonal), max |total-local-cross| " +
              fmt("%.1e", worst_sum) + ", max |local-V1/C| " + fmt("%.1e", worst_local)};
}

Outcome criterion_5() {
  Gen gen(1005);
  int violations = 0;
  double worst_m = 0.0, worst_series = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Index d = gen.integer(2, 8);
    const DensityMatrix rho(gen.density(d));
    const auto o = dv::formal_observable(rho, DensityMatrix(gen.density(d, gen.integer(1, static_cast<int>(d)))));
    const double m1 = std::abs(dv::moment(rho, o, 1));
    const double m2 = std::abs(dv::moment(rho, o, 2) - dv::quantum_variance(rho, o.matrix));
    worst_m = std::max({worst_m, m1, m2});
    if (m1 > 1e-8 || m2 > 1e-8) ++violations;

    // sigma = rho^{1/2} (I + K) rho^{1/2} with <K> = 0 has formal observable I + K.
    ComplexMatrix k = gen.hermitian(d);
    k -= (rho.matrix() * k).trace().real() * ComplexMatrix::Identity(d, d);
    k *= gen.uniform(0.01, 0.1) / linalg::schatten_norm(k, 2.0);
    const ComplexMatrix half = linalg::matrix_sqrt(rho.matrix());
    const DensityMatrix sigma(half * (ComplexMatrix::Identity(d, d) + k) * half);
    const auto series = dv::bs_series_residual(rho, dv::formal_observable(rho, sigma).matrix, 6);
    const double gap = std::abs(series.truncated - dv::bs_entropy(sigma, rho, 1).value);
    worst_series = std::max(worst_series, gap);
    if (series.hs_distance > 0.1 + 1e-12 || gap > 1e-8) ++violations;
  }
  return {violations == 0, "200 instances, max |M1|, |M2-V| " + fmt("%.1e", worst_m) +
                               ", max |series(6) - S_BS| at ||O-I||_2 <= 0.1: " + fmt("%.1e", worst_series)};
}

Outcome criterion_6() {
  int rows = 0, violations = 0;
  Gen gen(1006);
  for (int t = 0; t < 200; ++t) {
    const Index d = gen.integer(2, 16);
    const ComplexMatrix u = gen.unitary(d);
    RealVector w(d);
    for (Index i = 0; i < d; ++i) w(i) = gen.uniform(0.0, 1.0);
    w /= w.sum();
    for (const auto& r : ex::chebyshev_concentration(DensityMatrix::from_eigensystem(u, w), u, w, gen.hermitian(d),
                                                     {0.05, 0.1, 0.3, 1.0, 3.0})) {
      ++rows;
      violations += r.violated;
    }
  }
  // The model instances go through the same driver as a full run.
  auto cfg = config::parse("{}");
  cfg.experiments = {"chebyshev"};
  cfg.experiment_sizes["chebyshev"] = {{10, 2}};
  cfg.output_dir = (fs::temp_directory_path() / "subeth_acceptance_chebyshev").string();
  std::ostringstream log;
  const auto outcome = runner::run(cfg, log);
  const std::string csv = io::read_file(fs::path(cfg.output_dir) / "chebyshev.csv");
  const int model_rows = static_cast<int>(std::count(csv.begin(), csv.end(), '\n')) - 1;
  const bool averaged = csv.find("averaged_formal") != std::string::npos;
  return {violations == 0 && outcome.violations == 0 && averaged,
          std::to_string(rows) + " random rows and " + std::to_string(model_rows) +
              " N = 10 rows (microcanonical + canonical, standard and averaged forms), " +
              std::to_string(violations + outcome.violations) + " violations"};
}

Outcome criterion_7() {
  const auto t0 = Clock::now();
  const ex::SpectralContext ctx(chain(8), HamiltonianSpec{}, 2);
  double worst = 0.0;
  for (double beta : {0.0, 0.2, 1.0}) {
    const RealVector w = ensembles::gibbs_weights(ctx.eig().eigenvalues, beta);
    const auto r = ex::typicality_balance(DensityMatrix::from_eigensystem(ctx.eig().eigenvectors, w),
                                          ctx.partition(), ctx.eig().eigenvectors, w, 7);
    worst = std::max({worst, r.identity_residual, r.global_residual});
  }
  const double secs = since(t0);
  return {worst <= 1e-6 && secs < 300.0, "N = 8, N_A = 2, beta in {0, 0.2, 1}: max dual-path residual " +
                                              fmt("%.1e", worst) + ", " + fmt("%.1f", secs) + " s"};
}

Outcome criterion_8() {
  const auto& ctx = *shared_scan().contexts.at(10);
  const auto& e = ctx.eig().eigenvalues;
  const auto window = ex::select_window(ctx.dim(), SelectionPolicy{});
  bool ok = true;
  std::string detail;
  for (Index center : {window.front(), window[window.size() / 2], window.back()}) {
    const auto shell = ensembles::adaptive_shell(e, e(center), 20);
    const auto r = ex::ensemble_equivalence(ctx, shell);
    ok = ok && r.lhs <= r.rhs && r.lhs_half <= 0.1;
    detail += (detail.empty() ? "" : "; ") + std::string("D=") + std::to_string(r.shell_states) + " half-lhs " +
              fmt("%.4f", r.lhs_half) + " lhs " + fmt("%.4f", r.lhs) + " <= rhs " + fmt("%.4f", r.rhs);
  }
  return {ok, "N = 10 shells: " + detail};
}

Outcome criterion_9() {
  auto& scan = shared_scan();
  std::vector<double> ns, diag_medians, off_medians;
  for (int n : {8, 10, 12}) {
    std::vector<double> d, o;
    for (const auto& r : scan.diagonal[n]) d.push_back(r.trace_distance);
    for (const auto& r : scan.offdiagonal[n]) o.push_back(r.trace_norm);
    ns.push_back(n);
    diag_medians.push_back(ex::median(d));
    off_medians.push_back(ex::median(o));
  }
  const bool diag_decreasing = diag_medians[1] < diag_medians[0] && diag_medians[2] < diag_medians[1];
  const bool off_decreasing = off_medians[1] < off_medians[0] && off_medians[2] < off_medians[1];
  const auto fit = ex::fit_power_law(ns, diag_medians);
  const bool in_band = fit.exponent >= -1.2 && fit.exponent <= -0.15;
  std::string detail = "medians " + fmt("%.4f", diag_medians[0]) + ", " + fmt("%.4f", diag_medians[1]) + ", " +
                       fmt("%.4f", diag_medians[2]) + (diag_decreasing ? " (decreasing)" : " (NOT decreasing)") +
                       "; exponent " + fmt("%.3f", fit.exponent) + " +- " + fmt("%.2f", fit.half_width) +
                       (in_band ? " in" : " OUTSIDE") + " [-1.2, -0.15]; off-diagonal medians " +
                       fmt("%.4f", off_medians[0]) + ", " + fmt("%.4f", off_medians[1]) + ", " +
                       fmt("%.4f", off_medians[2]) + (off_decreasing ? " (decreasing)" : " (NOT decreasing)") +
                       "; scan " + fmt("%.0f", scan.seconds) + " s";
  return {diag_decreasing && off_decreasing && in_band, detail};
}

Outcome criterion_10() {
  const auto& ctx = *shared_scan().contexts.at(12);
  const auto& e = ctx.eig().eigenvalues;
  const auto warm = ex::correlation_decay_probe(ctx.marginals(ensembles::gibbs_weights(e, 0.2)), ctx.partition());
  const auto flat = ex::correlation_decay_probe(ctx.marginals(ensembles::gibbs_weights(e, 0.0)), ctx.partition());
  std::map<int, std::vector<double>> by_d;
  for (const auto& r : warm.records) by_d[r.distance].push_back(r.corr_norm);
  std::vector<double> means;
  for (const auto& [d, v] : by_d) means.push_back(ex::median(v));
  // Copies at equal distance agree to rounding; that spread is the noise floor.
  double noise = 0.0;
  for (const auto& [d, v] : by_d) {
    noise = std::max(noise, *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end()));
  }
  bool monotone = true;
  for (std::size_t t = 1; t < means.size(); ++t) monotone = monotone && means[t] <= means[t - 1] + noise + 1e-12;
  const bool finite_xi = warm.fit.better_model != "none" && std::isfinite(warm.fit.xi) && warm.fit.xi > 0.0;
  double flat_max = 0.0;
  for (const auto& r : flat.records) flat_max = std::max(flat_max, r.corr_norm);
  std::string corr;
  for (double m : means) corr += (corr.empty() ? "" : ", ") + fmt("%.2e", m);
  return {monotone && finite_xi && flat_max <= 1e-10,
          "beta = 0.2 corr by distance 1, 3, 5: " + corr + (monotone ? " (nonincreasing)" : " (NOT monotone)") +
              ", xi = " + fmt("%.3f", warm.fit.xi) + "; beta = 0 max corr " + fmt("%.1e", flat_max)};
}

Outcome criterion_11() {
  auto cfg = config::parse("{}");
  cfg.sizes = {{6, 2}, {8, 2}};
  cfg.experiment_sizes = {{"corr-decay", {{8, 2}}}, {"typicality", {{6, 2}}}, {"inequality-audit", {{6, 2}}}};
  cfg.experiments = config::known_experiments();
  cfg.audit_random_pairs = 200;
  cfg.threads = 0;
  const fs::path base = fs::temp_directory_path() / "subeth_acceptance_determinism";
  std::vector<fs::path> dirs{base / "a", base / "b"};
  for (const auto& d : dirs) {
    fs::remove_all(d);
    cfg.output_dir = d.string();
    std::ostringstream log;
    runner::run(cfg, log);
  }
  int files = 0, differing = 0;
  for (const auto& name : config::known_experiments()) {
    const std::string f = runner::csv_file_name(name);
    ++files;
    if (io::read_file(dirs[0] / f) != io::read_file(dirs[1] / f)) ++differing;
  }
  return {differing == 0, std::to_string(files) + " CSVs compared across two runs, " + std::to_string(differing) +
                              " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> known;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--known-failure") == 0 && a + 1 < argc) {
      known.insert(std::atoi(argv[++a]));
    } else {
      std::fprintf(stderr, "usage: %s [--known-failure K]...\n", argv[0]);
      return 2;
    }
  }

  const std::vector<std::function<Outcome()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                       criterion_5, criterion_6, criterion_7, criterion_8,
                                                       criterion_9, criterion_10, criterion_11};
  int unexpected = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    Outcome o;
    try {
      o = criteria[k]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool is_known = known.count(id) > 0;
    std::printf("criterion %2d: %s  %s%s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                !o.pass && is_known ? "  [known failure]" : "");
    std::fflush(stdout);
    if (!o.pass && !is_known) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
