#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "topopt/mesh.hpp"

namespace topopt {

using ElementMatrix = std::array<double, kDofsPerElement * kDofsPerElement>;

/// 24x24 stiffness of the trilinear hexahedron for unit Young's modulus,
/// row-major in the local DOF order of DofMap rows.
struct UnitStiffness {
  ElementMatrix ke{};
  double nu = 0.3;
  double hx = 1.0;
  double hy = 1.0;
  double hz = 1.0;

  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept {
    return ke[i * kDofsPerElement + j];
  }
  [[nodiscard]] double frobenius_norm() const noexcept;
};

/// Isotropic constitutive matrix for E = 1, Voigt order (xx, yy, zz, yz, xz, xy).
std::array<double, 36> isotropic_constitutive(double nu);

/// Full 2x2x2 Gauss integration of B^T C B. Throws std::invalid_argument for
/// nu outside (-1, 0.5) or non-positive edge lengths.
UnitStiffness compute_unit_ke(double nu = 0.3, double hx = 1.0, double hy = 1.0, double hz = 1.0);

struct SimpParams {
  double penalty = 3.0;
  double rho_min = 1e-9;
};

/// rho_min + (1 - rho_min) * rho^p; exactly 1 at rho = 1.
double simp_scale(double rho, const SimpParams& params);

/// Row-major dense matrix; only used as a test oracle on small meshes.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> a;

  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept {
    return a[i * n + j];
  }
  double& operator()(std::size_t i, std::size_t j) noexcept { return a[i * n + j]; }
};

inline constexpr std::size_t kDenseAssemblyLimit = 10'000;

/// Sum_e B_e^T k_e K_unit B_e. When fixed is non-empty, rows and columns of
/// constrained DOFs are zeroed, matching the matrix-free operator's output.
/// Throws std::length_error above kDenseAssemblyLimit DOFs.
DenseMatrix assemble_dense_k(const DofMap& dofs, const UnitStiffness& unit_ke,
                             std::span<const double> rho, const SimpParams& params,
                             std::span<const std::uint8_t> fixed = {});

}  // namespace topopt
