#include "topopt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace topopt {

StructuredMesh build_mesh(int nelx, int nely, int nelz, double hx, double hy, double hz) {
  if (nelx < 1 || nely < 1 || nelz < 1) {
    throw std::invalid_argument("build_mesh: element counts must be >= 1, got " +
                                std::to_string(nelx) + "x" + std::to_string(nely) + "x" +
                                std::to_string(nelz));
  }
  if (!(hx > 0.0) || !(hy > 0.0) || !(hz > 0.0)) {
    throw std::invalid_argument("build_mesh: element edge lengths must be positive");
  }
  StructuredMesh mesh{nelx, nely, nelz, hx, hy, hz};
  if (mesh.n_dof() > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("build_mesh: DOF count exceeds 32-bit index range");
  }
  return mesh;
}

DofMap build_dof_map(const StructuredMesh& mesh) {
  DofMap map;
  map.n_elem = mesh.n_elem();
  map.n_dof = mesh.n_dof();
  map.edof.resize(map.n_elem * kDofsPerElement);
  std::size_t e = 0;
  for (int k = 0; k < mesh.nelz; ++k) {
    for (int j = 0; j < mesh.nely; ++j) {
      for (int i = 0; i < mesh.nelx; ++i, ++e) {
        auto* row = map.edof.data() + e * kDofsPerElement;
        for (std::size_t a = 0; a < kNodesPerElement; ++a) {
          const auto& off = kLocalNodeOffsets[a];
          const auto node = mesh.node_id(i + off[0], j + off[1], k + off[2]);
          for (std::size_t c = 0; c < 3; ++c) {
            row[3 * a + c] = static_cast<std::uint32_t>(3 * node + c);
          }
        }
      }
    }
  }
  return map;
}

std::size_t BoundaryConditions::n_fixed() const noexcept {
  return static_cast<std::size_t>(std::count(fixed.begin(), fixed.end(), std::uint8_t{1}));
}

BoundaryConditions free_boundary(std::size_t n_dof) {
  return BoundaryConditions{std::vector<std::uint8_t>(n_dof, 0), std::vector<double>(n_dof, 0.0)};
}

std::string_view to_string(PresetKind kind) noexcept {
  switch (kind) {
    case PresetKind::cantilever:
      return "cantilever";
    case PresetKind::mbb:
      return "mbb";
    case PresetKind::bridge:
      return "bridge";
    case PresetKind::torsion:
      return "torsion";
  }
  return "unknown";
}

PresetKind parse_preset(std::string_view name) {
  for (auto kind :
       {PresetKind::cantilever, PresetKind::mbb, PresetKind::bridge, PresetKind::torsion}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown preset '" + std::string(name) +
                              "' (expected cantilever, mbb, bridge or torsion)");
}

std::array<int, 3> reference_grid(PresetKind kind) noexcept {
  switch (kind) {
    case PresetKind::cantilever:
      return {120, 60, 30};
    case PresetKind::mbb:
    case PresetKind::bridge:
      return {150, 50, 25};
    case PresetKind::torsion:
      return {165, 55, 55};
  }
  return {1, 1, 1};
}

namespace {

int scaled_count(int reference, double scale) {
  const double exact = reference * scale;
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-9 * std::max(1.0, exact) || rounded < 1.0) {
    throw std::invalid_argument("preset scale " + std::to_string(scale) +
                                " does not give an integer element count for reference " +
                                std::to_string(reference));
  }
  return static_cast<int>(rounded);
}

// Nearest grid index for a coordinate in [0, extent] mapped onto n elements.
int nearest_index(double coord, double extent, int n) {
  const long idx = std::lround(coord / extent * n);
  return static_cast<int>(std::clamp<long>(idx, 0, n));
}

void fix(BoundaryConditions& bcs, std::size_t node, std::initializer_list<int> comps) {
  for (int c : comps) bcs.fixed[3 * node + static_cast<std::size_t>(c)] = 1;
}

void add_load(BoundaryConditions& bcs, std::size_t node, int comp, double value) {
  bcs.load[3 * node + static_cast<std::size_t>(comp)] += value;
}

// Cantilever: domain 2 x 1 x 0.5, left face clamped, unit -y load at the
// right-face midpoint.
void cantilever_bcs(const StructuredMesh& m, BoundaryConditions& bcs) {
  for (int k = 0; k <= m.nelz; ++k)
    for (int j = 0; j <= m.nely; ++j) fix(bcs, m.node_id(0, j, k), {0, 1, 2});
  const int jl = nearest_index(0.5, 1.0, m.nely);
  const int kl = nearest_index(0.25, 0.5, m.nelz);
  add_load(bcs, m.node_id(m.nelx, jl, kl), 1, -1.0);
}

// MBB: domain 3 x 1 x 0.5. The left face is a symmetry plane (u_x = 0, with
// u_z also held to remove the remaining rigid modes), u_y is held at the
// support point (3, 0, 0.25) and a unit -y load acts at (0, 1, 0.25).
void mbb_bcs(const StructuredMesh& m, BoundaryConditions& bcs) {
  for (int k = 0; k <= m.nelz; ++k)
    for (int j = 0; j <= m.nely; ++j) fix(bcs, m.node_id(0, j, k), {0, 2});
  const int kc = nearest_index(0.25, 0.5, m.nelz);
  fix(bcs, m.node_id(nearest_index(3.0, 3.0, m.nelx), nearest_index(0.0, 1.0, m.nely), kc), {1});
  add_load(bcs, m.node_id(nearest_index(0.0, 3.0, m.nelx), nearest_index(1.0, 1.0, m.nely), kc), 1,
           -1.0);
}

// Bridge: domain 3 x 1 x 0.5, pinned left lower edge, x-roller right lower
// edge, unit total -y load spread evenly over the top face nodes.
void bridge_bcs(const StructuredMesh& m, BoundaryConditions& bcs) {
  for (int k = 0; k <= m.nelz; ++k) {
    fix(bcs, m.node_id(0, 0, k), {0, 1, 2});
    fix(bcs, m.node_id(m.nelx, 0, k), {1, 2});
  }
  const double share = 1.0 / static_cast<double>((m.nelx + 1) * (m.nelz + 1));
  for (int k = 0; k <= m.nelz; ++k)
    for (int i = 0; i <= m.nelx; ++i) add_load(bcs, m.node_id(i, m.nely, k), 1, -share);
}

// Torsion: left face clamped; the right face carries +z load along its top
// edge and -z load along its bottom edge, each totalling one force unit.
void torsion_bcs(const StructuredMesh& m, BoundaryConditions& bcs) {
  for (int k = 0; k <= m.nelz; ++k)
    for (int j = 0; j <= m.nely; ++j) fix(bcs, m.node_id(0, j, k), {0, 1, 2});
  const double share = 1.0 / static_cast<double>(m.nelz + 1);
  for (int k = 0; k <= m.nelz; ++k) {
    add_load(bcs, m.node_id(m.nelx, m.nely, k), 2, share);
    add_load(bcs, m.node_id(m.nelx, 0, k), 2, -share);
  }
}

}  // namespace

ProblemPreset make_preset(PresetKind kind, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("preset scale must be positive");
  const auto ref = reference_grid(kind);
  ProblemPreset preset;
  preset.kind = kind;
  preset.mesh = build_mesh(scaled_count(ref[0], scale), scaled_count(ref[1], scale),
                           scaled_count(ref[2], scale));
  preset.bcs = free_boundary(preset.mesh.n_dof());
  preset.filter_radius = 1.5;
  switch (kind) {
    case PresetKind::cantilever:
      cantilever_bcs(preset.mesh, preset.bcs);
      preset.volume_fraction = 0.30;
      break;
    case PresetKind::mbb:
      mbb_bcs(preset.mesh, preset.bcs);
      preset.volume_fraction = 0.50;
      break;
    case PresetKind::bridge:
      bridge_bcs(preset.mesh, preset.bcs);
      preset.volume_fraction = 0.30;
      break;
    case PresetKind::torsion:
      torsion_bcs(preset.mesh, preset.bcs);
      preset.volume_fraction = 0.25;
      break;
  }
  for (std::size_t d = 0; d < preset.bcs.n_dof(); ++d) {
    if (preset.bcs.is_fixed(d)) preset.bcs.load[d] = 0.0;
  }
  return preset;
}

ProblemPreset make_preset(std::string_view name, double scale) {
  return make_preset(parse_preset(name), scale);
}

}  // namespace topopt
