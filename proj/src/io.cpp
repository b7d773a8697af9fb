#include "subeth/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

namespace subeth::io {

using json = nlohmann::json;

StateFile parse_state(const std::string& text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error("state file is not a JSON object");
  try {
    StateFile s;
    s.kind = j.at("kind").get<std::string>();
    if (s.kind != "density" && s.kind != "transition" && s.kind != "generic") {
      throw Error("state file: unknown kind '" + s.kind + "'");
    }
    const auto dim = j.at("dim").get<Index>();
    if (dim < 1) throw DimensionError("state file: dim must be positive");
    if (j.contains("site_dims")) s.site_dims = j["site_dims"].get<std::vector<int>>();
    if (!s.site_dims.empty()) {
      Index prod = 1;
      for (int d : s.site_dims) prod *= d;
      if (prod != dim) throw DimensionError("state file: site_dims do not multiply to dim");
    }
    const auto& entries = j.at("entries");
    if (!entries.is_array() || static_cast<Index>(entries.size()) != dim * dim) {
      throw DimensionError("state file: expected dim*dim entries");
    }
    s.matrix.resize(dim, dim);
    for (Index r = 0; r < dim; ++r) {
      for (Index c = 0; c < dim; ++c) {
        const auto& e = entries[static_cast<std::size_t>(r * dim + c)];
        if (!e.is_array() || e.size() != 2) throw Error("state file: entries are [re, im] pairs");
        s.matrix(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
      }
    }
    if (j.contains("ket_index")) s.ket_index = j["ket_index"].get<Index>();
    if (j.contains("bra_index")) s.bra_index = j["bra_index"].get<Index>();
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("state file: ") + e.what());
  }
}

StateFile read_state(const std::filesystem::path& path) { return parse_state(read_file(path)); }

std::string serialize_state(const StateFile& state) {
  const Index dim = state.matrix.rows();
  json entries = json::array();
  for (Index r = 0; r < dim; ++r) {
    for (Index c = 0; c < dim; ++c) entries.push_back({state.matrix(r, c).real(), state.matrix(r, c).imag()});
  }
  json j{{"kind", state.kind}, {"dim", dim}, {"site_dims", state.site_dims}, {"entries", entries}};
  if (state.ket_index) j["ket_index"] = *state.ket_index;
  if (state.bra_index) j["bra_index"] = *state.bra_index;
  return j.dump() + "\n";
}

DensityMatrix as_density(const StateFile& state) {
  if (state.kind != "density") throw Error("expected a density-matrix state file, got kind '" + state.kind + "'");
  return DensityMatrix(state.matrix);
}

BlockOperand as_operand(const StateFile& state) {
  if (state.kind == "density") return DensityMatrix(state.matrix);
  if (state.kind == "transition") {
    return TransitionMatrix{state.matrix, state.ket_index.value_or(0), state.bra_index.value_or(0)};
  }
  throw Error("generic matrices are not valid block operands");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  line += '\n';
  return line;
}

}  // namespace subeth::io
