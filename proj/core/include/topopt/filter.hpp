#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "topopt/mesh.hpp"

namespace topopt {

/// Row-stochastic cone filter on the element grid, stored as CSR. Distances
/// are measured between element centres in element widths.
struct FilterOperator {
  std::size_t n_elem = 0;
  double radius = 0.0;
  std::vector<std::size_t> offsets;  // n_elem + 1
  std::vector<std::uint32_t> neighbors;
  std::vector<double> weights;  // normalized per row

  [[nodiscard]] std::size_t row_size(std::size_t e) const noexcept {
    return offsets[e + 1] - offsets[e];
  }
};

/// w_ij = max(0, r_min - dist(i, j)), rows normalized. r_min < 1 degenerates
/// to the identity and logs a warning; r_min <= 0 throws.
FilterOperator build_cone_filter(const StructuredMesh& mesh, double r_min);

/// out = W rho.
void apply_filter(const FilterOperator& filter, std::span<const double> rho, std::span<double> out);
std::vector<double> apply_filter(const FilterOperator& filter, std::span<const double> rho);

/// out = W^T s.
void apply_filter_transpose(const FilterOperator& filter, std::span<const double> s,
                            std::span<double> out);
std::vector<double> apply_filter_transpose(const FilterOperator& filter, std::span<const double> s);

}  // namespace topopt
