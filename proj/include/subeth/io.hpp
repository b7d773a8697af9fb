#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "subeth/core.hpp"
#include "subeth/divergences.hpp"

namespace subeth::io {

/// State file: {"kind": "density"|"transition"|"generic", "dim": n,
/// "site_dims": [...], "entries": [[re, im], ...] row-major,
/// optional "ket_index"/"bra_index" for transitions}.
struct StateFile {
  std::string kind = "density";
  std::vector<int> site_dims;
  ComplexMatrix matrix;
  std::optional<Index> ket_index;
  std::optional<Index> bra_index;
};

StateFile parse_state(const std::string& text);
StateFile read_state(const std::filesystem::path& path);
std::string serialize_state(const StateFile& state);

/// Density kind as a validated DensityMatrix; anything else is rejected.
DensityMatrix as_density(const StateFile& state);
BlockOperand as_operand(const StateFile& state);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// Round-trip decimal form ("%.17g"); nan/inf spelled out.
std::string format_double(double x);
std::string csv_line(const std::vector<std::string>& fields);

}  // namespace subeth::io
