#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "topopt/mesh.hpp"

namespace topopt {
namespace {

TEST(Mesh, CountsFollowGridDimensions) {
  const auto m = build_mesh(4, 3, 2);
  EXPECT_EQ(m.n_elem(), 24u);
  EXPECT_EQ(m.n_node(), 5u * 4u * 3u);
  EXPECT_EQ(m.n_dof(), 3u * 60u);
}

TEST(Mesh, NodeNumberingIsXFastest) {
  const auto m = build_mesh(3, 2, 2);
  EXPECT_EQ(m.node_id(1, 0, 0), 1u);
  EXPECT_EQ(m.node_id(0, 1, 0), 4u);
  EXPECT_EQ(m.node_id(0, 0, 1), 12u);
  for (std::size_t id = 0; id < m.n_node(); ++id) {
    const auto [i, j, k] = m.node_coords(id);
    EXPECT_EQ(m.node_id(i, j, k), id);
  }
  for (std::size_t e = 0; e < m.n_elem(); ++e) {
    const auto [i, j, k] = m.element_coords(e);
    EXPECT_EQ(m.element_id(i, j, k), e);
  }
}

TEST(Mesh, RejectsDegenerateGrids) {
  EXPECT_THROW(build_mesh(0, 1, 1), std::invalid_argument);
  EXPECT_THROW(build_mesh(1, -2, 1), std::invalid_argument);
  EXPECT_THROW(build_mesh(1, 1, 1, 0.0), std::invalid_argument);
}

TEST(DofMap, MatchesCoordinateDerivedDofs) {
  const auto m = build_mesh(4, 3, 2);
  const auto dofs = build_dof_map(m);
  ASSERT_EQ(dofs.n_elem, m.n_elem());
  ASSERT_EQ(dofs.edof.size(), m.n_elem() * kDofsPerElement);
  for (int k = 0; k < m.nelz; ++k) {
    for (int j = 0; j < m.nely; ++j) {
      for (int i = 0; i < m.nelx; ++i) {
        const auto row = dofs.row(m.element_id(i, j, k));
        const auto ref = oracle::element_dofs(m, i, j, k);
        EXPECT_TRUE(std::equal(row.begin(), row.end(), ref.begin()));
      }
    }
  }
}

TEST(DofMap, RowsHaveDistinctInRangeDofsAndCoverTheMesh) {
  const auto m = build_mesh(3, 3, 3);
  const auto dofs = build_dof_map(m);
  std::vector<int> seen(m.n_dof(), 0);
  for (std::size_t e = 0; e < dofs.n_elem; ++e) {
    const auto row = dofs.row(e);
    std::set<std::uint32_t> unique(row.begin(), row.end());
    EXPECT_EQ(unique.size(), kDofsPerElement);
    for (auto d : row) {
      ASSERT_LT(d, m.n_dof());
      seen[d] = 1;
    }
  }
  EXPECT_EQ(std::accumulate(seen.begin(), seen.end(), 0), static_cast<int>(m.n_dof()));
}

TEST(Presets, DeskScaleGrids) {
  EXPECT_EQ(make_preset("cantilever", 0.2).mesh.n_elem(), 24u * 12u * 6u);
  const auto mbb = make_preset("mbb", 0.2);
  EXPECT_EQ(mbb.mesh.nelx, 30);
  EXPECT_EQ(mbb.mesh.nely, 10);
  EXPECT_EQ(mbb.mesh.nelz, 5);
  EXPECT_EQ(make_preset("torsion", 0.2).mesh.nelz, 11);
  EXPECT_THROW(make_preset("cantilever", 0.013), std::invalid_argument);
  EXPECT_THROW(make_preset("cantilever", -1.0), std::invalid_argument);
  EXPECT_THROW(make_preset("plate", 0.2), std::invalid_argument);
}

TEST(Presets, VolumeFractions) {
  EXPECT_DOUBLE_EQ(make_preset("cantilever", 0.2).volume_fraction, 0.30);
  EXPECT_DOUBLE_EQ(make_preset("mbb", 0.2).volume_fraction, 0.50);
  EXPECT_DOUBLE_EQ(make_preset("bridge", 0.2).volume_fraction, 0.30);
  EXPECT_DOUBLE_EQ(make_preset("torsion", 0.2).volume_fraction, 0.25);
}

TEST(Presets, CantileverClampsLeftFaceAndLoadsRightFace) {
  const auto p = make_preset("cantilever", 0.2);
  const auto& m = p.mesh;
  for (std::size_t node = 0; node < m.n_node(); ++node) {
    const bool left = m.node_coords(node)[0] == 0;
    for (int c = 0; c < 3; ++c) EXPECT_EQ(p.bcs.is_fixed(3 * node + c), left);
  }
  double total = 0.0;
  for (std::size_t d = 0; d < p.bcs.n_dof(); ++d) {
    if (p.bcs.load[d] != 0.0) {
      EXPECT_EQ(d % 3, 1u);
      EXPECT_EQ(m.node_coords(d / 3)[0], m.nelx);
    }
    total += p.bcs.load[d];
  }
  EXPECT_DOUBLE_EQ(total, -1.0);
}

TEST(Presets, EveryPresetHasUnitTotalLoadAndNoLoadOnFixedDofs) {
  for (const char* name : {"cantilever", "mbb", "bridge", "torsion"}) {
    const auto p = make_preset(name, 0.2);
    double abs_total = 0.0;
    for (std::size_t d = 0; d < p.bcs.n_dof(); ++d) {
      if (p.bcs.is_fixed(d)) EXPECT_EQ(p.bcs.load[d], 0.0) << name;
      abs_total += std::abs(p.bcs.load[d]);
    }
    EXPECT_GT(p.bcs.n_fixed(), 0u) << name;
    EXPECT_NEAR(abs_total, std::string(name) == "torsion" ? 2.0 : 1.0, 1e-12) << name;
  }
}

TEST(Presets, TorsionLoadIsAPureCouple) {
  const auto p = make_preset("torsion", 0.2);
  double fz = 0.0;
  double moment_x = 0.0;
  for (std::size_t node = 0; node < p.mesh.n_node(); ++node) {
    const double f = p.bcs.load[3 * node + 2];
    fz += f;
    moment_x += f * p.mesh.node_coords(node)[1];
  }
  EXPECT_NEAR(fz, 0.0, 1e-12);
  EXPECT_GT(std::abs(moment_x), 0.0);
}

TEST(Presets, PresetNamesRoundTrip) {
  for (auto kind :
       {PresetKind::cantilever, PresetKind::mbb, PresetKind::bridge, PresetKind::torsion}) {
    EXPECT_EQ(parse_preset(to_string(kind)), kind);
  }
}

}  // namespace
}  // namespace topopt
