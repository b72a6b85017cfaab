#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "topopt/element.hpp"

namespace topopt {
namespace {

Eigen::MatrixXd to_eigen(const UnitStiffness& ke) {
  Eigen::MatrixXd m(24, 24);
  for (int i = 0; i < 24; ++i)
    for (int j = 0; j < 24; ++j) m(i, j) = ke(i, j);
  return m;
}

TEST(UnitStiffness, MatchesIndependentQuadrature) {
  for (const auto& [nu, hx, hy, hz] :
       {std::array<double, 4>{0.3, 1.0, 1.0, 1.0}, std::array<double, 4>{0.25, 2.0, 1.0, 0.5},
        std::array<double, 4>{0.45, 0.3, 0.7, 1.9}}) {
    const auto lib = to_eigen(compute_unit_ke(nu, hx, hy, hz));
    const auto ref = oracle::hex_stiffness(nu, hx, hy, hz);
    EXPECT_LE((lib - ref).norm() / ref.norm(), 1e-13) << "nu=" << nu;
  }
}

TEST(UnitStiffness, IsSymmetric) {
  const auto ke = to_eigen(compute_unit_ke());
  EXPECT_LE((ke - ke.transpose()).cwiseAbs().maxCoeff(), 1e-12 * ke.norm());
}

TEST(UnitStiffness, HasExactlySixRigidBodyModes) {
  const auto ke = compute_unit_ke();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(ke));
  const double tol = 1e-9 * ke.frobenius_norm();
  int near_zero = 0;
  for (int i = 0; i < 24; ++i) {
    const double lam = es.eigenvalues()(i);
    EXPECT_GT(lam, -tol);
    if (std::abs(lam) <= tol) ++near_zero;
  }
  EXPECT_EQ(near_zero, 6);
}

TEST(UnitStiffness, AnnihilatesTranslationsAndRotations) {
  const auto ke = to_eigen(compute_unit_ke(0.3, 1.0, 2.0, 0.5));
  const double h[3] = {1.0, 2.0, 0.5};
  const int corner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                            {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(24);
    for (int a = 0; a < 8; ++a) t(3 * a + c) = 1.0;
    EXPECT_LE((ke * t).norm(), 1e-12 * ke.norm()) << "translation " << c;
  }
  for (int axis = 0; axis < 3; ++axis) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(24);
    for (int a = 0; a < 8; ++a) {
      Eigen::Vector3d x(corner[a][0] * h[0], corner[a][1] * h[1], corner[a][2] * h[2]);
      const Eigen::Vector3d v = Eigen::Vector3d::Unit(axis).cross(x);
      r.segment<3>(3 * a) = v;
    }
    EXPECT_LE((ke * r).norm(), 1e-12 * ke.norm()) << "rotation " << axis;
  }
}

TEST(UnitStiffness, RejectsInvalidMaterialAndGeometry) {
  EXPECT_THROW(compute_unit_ke(0.5), std::invalid_argument);
  EXPECT_THROW(compute_unit_ke(-1.0), std::invalid_argument);
  EXPECT_THROW(compute_unit_ke(0.3, 0.0), std::invalid_argument);
}

TEST(SimpScale, EndpointsAndMonotonicity) {
  const SimpParams p{3.0, 1e-9};
  EXPECT_EQ(simp_scale(1.0, p), 1.0);
  EXPECT_DOUBLE_EQ(simp_scale(0.0, p), 1e-9);
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double rho = i / 100.0;
    const double s = simp_scale(rho, p);
    EXPECT_NEAR(s, oracle::simp_modulus(rho, 3.0, 1e-9), 1e-15);
    EXPECT_GE(s, prev);
    prev = s;
  }
}

TEST(DenseAssembly, MatchesOracleAssembly) {
  const auto mesh = build_mesh(3, 2, 2);
  const auto dofs = build_dof_map(mesh);
  const auto ke = compute_unit_ke();
  std::vector<double> rho(mesh.n_elem());
  for (std::size_t e = 0; e < rho.size(); ++e) rho[e] = 0.1 + 0.8 * static_cast<double>(e) / 11.0;
  std::vector<std::uint8_t> fixed(mesh.n_dof(), 0);
  fixed[0] = fixed[4] = fixed[17] = 1;
  const SimpParams p{3.0, 1e-9};
  const auto lib = assemble_dense_k(dofs, ke, rho, p, fixed);
  std::vector<double> scale(rho.size());
  for (std::size_t e = 0; e < rho.size(); ++e) scale[e] = oracle::simp_modulus(rho[e], 3.0, 1e-9);
  const auto ref = oracle::assemble(mesh, oracle::hex_stiffness(0.3, 1, 1, 1), scale, fixed);
  double err = 0.0;
  for (std::size_t i = 0; i < lib.n; ++i)
    for (std::size_t j = 0; j < lib.n; ++j)
      err = std::max(err, std::abs(lib(i, j) - ref(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(j))));
  EXPECT_LE(err, 1e-13 * ref.norm());
}

}  // namespace
}  // namespace topopt
