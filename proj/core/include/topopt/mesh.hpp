#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace topopt {

inline constexpr std::size_t kNodesPerElement = 8;
inline constexpr std::size_t kDofsPerElement = 24;

/// Structured grid of nelx x nely x nelz hexahedra. Nodes are numbered
/// x-fastest: id = i + j*(nelx+1) + k*(nelx+1)*(nely+1); node id owns
/// DOFs 3*id, 3*id+1, 3*id+2 for the x, y, z displacement components.
/// Elements use the same x-fastest ordering.
struct StructuredMesh {
  int nelx = 1;
  int nely = 1;
  int nelz = 1;
  double hx = 1.0;
  double hy = 1.0;
  double hz = 1.0;

  [[nodiscard]] std::size_t n_elem() const noexcept {
    return static_cast<std::size_t>(nelx) * nely * nelz;
  }
  [[nodiscard]] std::size_t n_node() const noexcept {
    return static_cast<std::size_t>(nelx + 1) * (nely + 1) * (nelz + 1);
  }
  [[nodiscard]] std::size_t n_dof() const noexcept { return 3 * n_node(); }

  [[nodiscard]] std::size_t node_id(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(nelx + 1) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(nely + 1) * k);
  }
  [[nodiscard]] std::array<int, 3> node_coords(std::size_t id) const noexcept {
    const auto nx = static_cast<std::size_t>(nelx + 1);
    const auto ny = static_cast<std::size_t>(nely + 1);
    return {static_cast<int>(id % nx), static_cast<int>((id / nx) % ny),
            static_cast<int>(id / (nx * ny))};
  }
  [[nodiscard]] std::size_t element_id(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(nelx) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(nely) * k);
  }
  [[nodiscard]] std::array<int, 3> element_coords(std::size_t e) const noexcept {
    const auto nx = static_cast<std::size_t>(nelx);
    const auto ny = static_cast<std::size_t>(nely);
    return {static_cast<int>(e % nx), static_cast<int>((e / nx) % ny),
            static_cast<int>(e / (nx * ny))};
  }
};

/// Throws std::invalid_argument when any count is < 1 or any edge length <= 0.
StructuredMesh build_mesh(int nelx, int nely, int nelz, double hx = 1.0, double hy = 1.0,
                          double hz = 1.0);

/// Corner offsets of the trilinear hex in local node order. The element
/// stiffness builder and the DOF table both read this one table.
inline constexpr std::array<std::array<int, 3>, kNodesPerElement> kLocalNodeOffsets{{
    {0, 0, 0},
    {1, 0, 0},
    {1, 1, 0},
    {0, 1, 0},
    {0, 0, 1},
    {1, 0, 1},
    {1, 1, 1},
    {0, 1, 1},
}};

/// Element-to-DOF table (the Boolean gather/scatter selector in index form).
/// Row e holds the 24 global DOFs of element e: local node a, component c at
/// column 3*a + c.
struct DofMap {
  std::size_t n_elem = 0;
  std::size_t n_dof = 0;
  std::vector<std::uint32_t> edof;  // n_elem x 24, row-major

  [[nodiscard]] std::span<const std::uint32_t, kDofsPerElement> row(std::size_t e) const noexcept {
    return std::span<const std::uint32_t, kDofsPerElement>(edof.data() + e * kDofsPerElement,
                                                           kDofsPerElement);
  }
};

DofMap build_dof_map(const StructuredMesh& mesh);

struct BoundaryConditions {
  std::vector<std::uint8_t> fixed;  // 1 = displacement constrained to zero
  std::vector<double> load;

  [[nodiscard]] std::size_t n_dof() const noexcept { return load.size(); }
  [[nodiscard]] std::size_t n_fixed() const noexcept;
  [[nodiscard]] bool is_fixed(std::size_t dof) const noexcept { return fixed[dof] != 0; }
};

BoundaryConditions free_boundary(std::size_t n_dof);

enum class PresetKind { cantilever, mbb, bridge, torsion };

std::string_view to_string(PresetKind kind) noexcept;
/// Throws std::invalid_argument on an unknown name.
PresetKind parse_preset(std::string_view name);

struct ProblemPreset {
  PresetKind kind = PresetKind::cantilever;
  StructuredMesh mesh;
  BoundaryConditions bcs;
  double volume_fraction = 0.3;
  double filter_radius = 1.5;  // element widths

  [[nodiscard]] std::string_view name() const noexcept { return to_string(kind); }
};

/// Reference grid of a preset at scale 1 (the full benchmark resolution).
std::array<int, 3> reference_grid(PresetKind kind) noexcept;

/// Builds one of the four benchmark problems. scale multiplies the reference
/// grid; every scaled count must be an integer.
ProblemPreset make_preset(std::string_view name, double scale);
ProblemPreset make_preset(PresetKind kind, double scale);

}  // namespace topopt
