#pragma once

#include <cstdint>
#include <vector>

#include "subeth/core.hpp"

namespace subeth {

/// Periodic one-dimensional lattice of `sites` identical sites.
struct LatticeSpec {
  int sites = 2;
  int local_dim = 2;
  int spatial_dim = 1;

  /// local_dim^sites; throws DimensionError when it does not fit an Index.
  Index full_dim() const;
  std::vector<int> site_dims() const { return std::vector<int>(static_cast<std::size_t>(sites), local_dim); }
  void validate() const;
};

}  // namespace subeth
