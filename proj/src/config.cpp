#include "subeth/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace subeth {

using json = nlohmann::json;

const std::vector<ScanSize>& ExperimentConfig::sizes_for(const std::string& experiment) const {
  const auto it = experiment_sizes.find(experiment);
  return it == experiment_sizes.end() ? sizes : it->second;
}

double ExperimentConfig::tolerance(const std::string& name) const {
  if (const auto it = tolerances.find(name); it != tolerances.end()) return it->second;
  const auto& defaults = config::default_tolerances();
  if (const auto it = defaults.find(name); it != defaults.end()) return it->second;
  throw ConfigError("unknown tolerance '" + name + "'");
}

namespace config {

const std::vector<std::string>& known_experiments() {
  static const std::vector<std::string> names{"eth-scan",   "offdiag-scan", "corr-decay",      "chebyshev",
                                              "typicality", "ensemble-eq",  "inequality-audit"};
  return names;
}

const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> t{
      {"identity", 1e-8},     // exact identities and theorem slacks
      {"typicality", 1e-6},   // dual-path aggregates
      {"pullup", 1e-6},
      {"chebyshev", 1e-12},
      {"decay_zero", 1e-10},  // corr_norm of a product state
  };
  return t;
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) fail(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    fail(where + ": " + e.what());
  }
}

std::vector<ScanSize> sizes_from(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where + ": expected a list of [N, N_A] pairs");
  std::vector<ScanSize> out;
  for (const auto& item : j) {
    if (!item.is_array() || item.size() != 2) fail(where + ": each size is [N, N_A]");
    out.push_back({get_as<int>(item[0], where), get_as<int>(item[1], where)});
  }
  return out;
}

json sizes_to(const std::vector<ScanSize>& sizes) {
  json a = json::array();
  for (const auto& s : sizes) a.push_back({s.sites, s.block_size});
  return a;
}

HamiltonianSpec model_from(const json& j) {
  check_keys(j, "model", {"family", "couplings", "terms", "range"});
  HamiltonianSpec m;
  if (j.contains("family")) m.family = get_as<std::string>(j["family"], "model.family");
  if (j.contains("couplings")) m.couplings = get_as<std::map<std::string, double>>(j["couplings"], "model.couplings");
  if (j.contains("range")) m.range = get_as<int>(j["range"], "model.range");
  if (j.contains("terms")) {
    for (const auto& t : j["terms"]) {
      check_keys(t, "model.terms", {"ops", "coefficient"});
      m.terms.push_back({get_as<std::string>(t.at("ops"), "model.terms.ops"),
                         get_as<double>(t.at("coefficient"), "model.terms.coefficient")});
    }
  }
  return m;
}

json model_to(const HamiltonianSpec& m) {
  json terms = json::array();
  for (const auto& t : m.terms) terms.push_back({{"ops", t.ops}, {"coefficient", t.coefficient}});
  return {{"family", m.family}, {"couplings", m.couplings}, {"terms", terms}, {"range", m.range}};
}

EnsembleSpec ensemble_from(const json& j) {
  check_keys(j, "ensemble", {"kind", "beta", "E_center", "delta"});
  EnsembleSpec e;
  if (j.contains("kind")) {
    const auto kind = get_as<std::string>(j["kind"], "ensemble.kind");
    if (kind == "canonical") {
      e.kind = EnsembleSpec::Kind::kCanonical;
    } else if (kind == "microcanonical") {
      e.kind = EnsembleSpec::Kind::kMicrocanonical;
    } else {
      fail("ensemble.kind must be 'canonical' or 'microcanonical'");
    }
  }
  if (j.contains("beta")) e.beta = get_as<double>(j["beta"], "ensemble.beta");
  if (j.contains("E_center") && !j["E_center"].is_null()) e.energy_center = get_as<double>(j["E_center"], "ensemble.E_center");
  if (j.contains("delta")) e.delta = get_as<double>(j["delta"], "ensemble.delta");
  return e;
}

json ensemble_to(const EnsembleSpec& e) {
  json j{{"kind", e.kind == EnsembleSpec::Kind::kCanonical ? "canonical" : "microcanonical"},
         {"beta", e.beta},
         {"delta", e.delta}};
  j["E_center"] = e.energy_center ? json(*e.energy_center) : json(nullptr);
  return j;
}

SelectionPolicy selection_from(const json& j) {
  check_keys(j, "selection", {"window_fraction", "max_states", "shell_min_states", "shell_fraction"});
  SelectionPolicy s;
  if (j.contains("window_fraction")) s.window_fraction = get_as<double>(j["window_fraction"], "selection.window_fraction");
  if (j.contains("max_states")) s.max_states = get_as<int>(j["max_states"], "selection.max_states");
  if (j.contains("shell_min_states")) s.shell_min_states = get_as<int>(j["shell_min_states"], "selection.shell_min_states");
  if (j.contains("shell_fraction")) s.shell_fraction = get_as<double>(j["shell_fraction"], "selection.shell_fraction");
  return s;
}

json selection_to(const SelectionPolicy& s) {
  return {{"window_fraction", s.window_fraction},
          {"max_states", s.max_states},
          {"shell_min_states", s.shell_min_states},
          {"shell_fraction", s.shell_fraction}};
}

void apply_override(json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) fail("override '" + spec + "' is not key=value");
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) fail("override '" + spec + "' has an empty key");
    if (!node->is_object()) fail("override '" + spec + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

ExperimentConfig from_json(const json& j) {
  check_keys(j, "config",
             {"model", "sizes", "experiment_sizes", "ensemble", "selection", "experiments", "tolerances",
              "output_dir", "seed", "memory_cap", "allow_large", "threads", "regularization",
              "audit_random_pairs", "typicality_betas", "decay_betas", "epsilon_grid"});
  ExperimentConfig c;
  if (j.contains("model")) c.model = model_from(j["model"]);
  if (j.contains("sizes")) c.sizes = sizes_from(j["sizes"], "sizes");
  if (j.contains("experiment_sizes")) {
    if (!j["experiment_sizes"].is_object()) fail("experiment_sizes: expected an object");
    for (const auto& [name, list] : j["experiment_sizes"].items()) {
      c.experiment_sizes[name] = sizes_from(list, "experiment_sizes." + name);
    }
  }
  if (j.contains("ensemble")) c.ensemble = ensemble_from(j["ensemble"]);
  if (j.contains("selection")) c.selection = selection_from(j["selection"]);
  if (j.contains("experiments")) c.experiments = get_as<std::vector<std::string>>(j["experiments"], "experiments");
  if (j.contains("tolerances")) c.tolerances = get_as<std::map<std::string, double>>(j["tolerances"], "tolerances");
  if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j["output_dir"], "output_dir");
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j["seed"], "seed");
  if (j.contains("memory_cap")) c.memory_cap = get_as<std::int64_t>(j["memory_cap"], "memory_cap");
  if (j.contains("allow_large")) c.allow_large = get_as<bool>(j["allow_large"], "allow_large");
  if (j.contains("threads")) c.threads = get_as<int>(j["threads"], "threads");
  if (j.contains("regularization")) c.regularization = get_as<double>(j["regularization"], "regularization");
  if (j.contains("audit_random_pairs")) c.audit_random_pairs = get_as<int>(j["audit_random_pairs"], "audit_random_pairs");
  if (j.contains("typicality_betas")) c.typicality_betas = get_as<std::vector<double>>(j["typicality_betas"], "typicality_betas");
  if (j.contains("decay_betas")) c.decay_betas = get_as<std::vector<double>>(j["decay_betas"], "decay_betas");
  if (j.contains("epsilon_grid")) c.epsilon_grid = get_as<std::vector<double>>(j["epsilon_grid"], "epsilon_grid");
  return c;
}

json to_json(const ExperimentConfig& c) {
  json sizes_by = json::object();
  for (const auto& [name, list] : c.experiment_sizes) sizes_by[name] = sizes_to(list);
  return {{"model", model_to(c.model)},
          {"sizes", sizes_to(c.sizes)},
          {"experiment_sizes", sizes_by},
          {"ensemble", ensemble_to(c.ensemble)},
          {"selection", selection_to(c.selection)},
          {"experiments", c.experiments},
          {"tolerances", c.tolerances},
          {"output_dir", c.output_dir},
          {"seed", c.seed},
          {"memory_cap", c.memory_cap},
          {"allow_large", c.allow_large},
          {"threads", c.threads},
          {"regularization", c.regularization},
          {"audit_random_pairs", c.audit_random_pairs},
          {"typicality_betas", c.typicality_betas},
          {"decay_betas", c.decay_betas},
          {"epsilon_grid", c.epsilon_grid}};
}

}  // namespace

ExperimentConfig parse(const std::string& text, const std::vector<std::string>& overrides) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail("config is not valid JSON");
  if (overrides.empty()) return from_json(j);
  // Overrides land on the fully populated config, so a single nested key
  // does not drop its defaulted siblings.
  json full = to_json(from_json(j));
  for (const auto& o : overrides) apply_override(full, o);
  return from_json(full);
}

ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) fail("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), overrides);
}

std::string serialize(const ExperimentConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

void validate(const ExperimentConfig& cfg) {
  const auto& known = known_experiments();
  if (cfg.experiments.empty()) fail("no experiments selected");
  for (const auto& name : cfg.experiments) {
    if (std::find(known.begin(), known.end(), name) == known.end()) fail("unknown experiment '" + name + "'");
  }
  for (const auto& [name, list] : cfg.experiment_sizes) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      fail("experiment_sizes names unknown experiment '" + name + "'");
    }
  }
  if (cfg.model.family != "tfim_long" && cfg.model.family != "xxz_field" && cfg.model.family != "custom_local") {
    fail("unknown model family '" + cfg.model.family + "'");
  }
  for (const auto& name : cfg.experiments) {
    for (const auto& s : cfg.sizes_for(name)) {
      std::ostringstream where;
      where << name << ": N=" << s.sites << ", N_A=" << s.block_size;
      if (s.sites < 2 || s.block_size < 1) fail(where.str() + " needs N >= 2 and N_A >= 1");
      if (s.sites % s.block_size != 0) fail(where.str() + ": N_A does not divide N");
      if (!cfg.allow_large) {
        double dim = 1.0;
        for (int i = 0; i < s.sites; ++i) dim *= 2.0;
        if (dim > static_cast<double>(cfg.memory_cap)) {
          std::ostringstream os;
          os << name << ": N=" << s.sites << " gives dimension " << dim << " above the memory cap "
             << cfg.memory_cap << " (use --allow-large)";
          fail(os.str());
        }
      }
    }
  }
  const auto positive = [](const std::vector<double>& v) {
    return !v.empty() && std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
  };
  if (!positive(cfg.epsilon_grid)) fail("epsilon_grid must be a non-empty list of positive values");
  if (cfg.selection.window_fraction <= 0.0 || cfg.selection.window_fraction > 1.0) {
    fail("selection.window_fraction must lie in (0, 1]");
  }
  if (cfg.selection.max_states < 1 || cfg.selection.shell_min_states < 1) fail("selection counts must be positive");
  if (cfg.audit_random_pairs < 0) fail("audit_random_pairs must be non-negative");
  if (cfg.threads < 0) fail("threads must be >= 0");
  if (!(cfg.regularization > 0.0)) fail("regularization must be positive");
  for (const auto& [name, value] : cfg.tolerances) {
    if (!default_tolerances().count(name)) fail("unknown tolerance '" + name + "'");
    if (!(value >= 0.0)) fail("tolerance '" + name + "' must be non-negative");
  }
  if (cfg.ensemble.kind == EnsembleSpec::Kind::kMicrocanonical && cfg.ensemble.delta < 0.0) {
    fail("ensemble.delta must be positive (or 0 for the adaptive shell)");
  }
}

std::uint64_t hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : serialize(cfg)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace config
}  // namespace subeth
