#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "topopt/mesh.hpp"

// Reference implementations written without the library's element, operator
// or filter code. Tests compare the library against these.
namespace topopt::oracle {

/// 24x24 hexahedron stiffness by 3-point Gauss quadrature on an explicitly
/// formed strain-displacement matrix (engineering shear, order xx yy zz xy yz zx).
Eigen::MatrixXd hex_stiffness(double nu, double hx, double hy, double hz);

/// Global DOFs of element (i, j, k) derived from node coordinates.
std::array<std::uint32_t, 24> element_dofs(const StructuredMesh& mesh, int i, int j, int k);

/// Sum of scale[e] * ke scattered by element_dofs; fixed rows and columns zeroed.
Eigen::MatrixXd assemble(const StructuredMesh& mesh, const Eigen::MatrixXd& ke,
                         std::span<const double> scale, std::span<const std::uint8_t> fixed = {});

/// Indices of unconstrained DOFs.
std::vector<int> free_dofs(std::span<const std::uint8_t> fixed, std::size_t n_dof);

/// K u = f on the free DOFs by dense Cholesky; zero on fixed DOFs.
std::vector<double> dense_solve(const Eigen::MatrixXd& k, std::span<const double> f,
                                std::span<const std::uint8_t> fixed);

/// Extreme eigenvalues of K restricted to the free DOFs.
std::array<double, 2> extreme_eigenvalues(const Eigen::MatrixXd& k,
                                          std::span<const std::uint8_t> fixed);

/// Nearest value with an 8-bit significand, ties to even, computed with
/// scaling and nearbyint rather than bit manipulation.
float bf16_round(float x);

/// Dense cone filter: w_ij = max(0, r - |c_i - c_j|), rows normalized.
Eigen::MatrixXd cone_filter(const StructuredMesh& mesh, double r);

/// Seeded uniform(-1, 1) vector.
std::vector<double> random_vector(std::size_t n, std::uint64_t seed);

/// SIMP modulus scale written out independently.
double simp_modulus(double rho, double penalty, double rho_min);

double relative_error(std::span<const double> a, std::span<const double> b);

/// Cantilever-style constraints on a small grid: x = 0 face clamped, unit
/// downward load at the far bottom edge.
struct SmallProblem {
  StructuredMesh mesh;
  std::vector<std::uint8_t> fixed;
  std::vector<double> load;
};
SmallProblem clamped_beam(int nelx, int nely, int nelz);

}  // namespace topopt::oracle
