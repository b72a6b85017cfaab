#include "topopt/element.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace topopt {

double UnitStiffness::frobenius_norm() const noexcept {
  double s = 0.0;
  for (double v : ke) s += v * v;
  return std::sqrt(s);
}

std::array<double, 36> isotropic_constitutive(double nu) {
  const double lambda = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = 1.0 / (2.0 * (1.0 + nu));
  std::array<double, 36> c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c[i * 6 + j] = lambda;
    c[i * 6 + i] = lambda + 2.0 * mu;
    c[(i + 3) * 6 + (i + 3)] = mu;
  }
  return c;
}

UnitStiffness compute_unit_ke(double nu, double hx, double hy, double hz) {
  if (!(nu > -1.0 && nu < 0.5)) {
    throw std::invalid_argument("compute_unit_ke: Poisson ratio must lie in (-1, 0.5), got " +
                                std::to_string(nu));
  }
  if (!(hx > 0.0 && hy > 0.0 && hz > 0.0)) {
    throw std::invalid_argument("compute_unit_ke: edge lengths must be positive");
  }

  const auto c = isotropic_constitutive(nu);
  const double gauss = 1.0 / std::sqrt(3.0);
  const double det_j = hx * hy * hz / 8.0;
  const std::array<double, 3> inv_j{2.0 / hx, 2.0 / hy, 2.0 / hz};

  UnitStiffness out;
  out.nu = nu;
  out.hx = hx;
  out.hy = hy;
  out.hz = hz;

  constexpr std::size_t n = kDofsPerElement;
  for (int gx = 0; gx < 2; ++gx) {
    for (int gy = 0; gy < 2; ++gy) {
      for (int gz = 0; gz < 2; ++gz) {
        const std::array<double, 3> xi{gx ? gauss : -gauss, gy ? gauss : -gauss,
                                       gz ? gauss : -gauss};
        // physical shape-function gradients
        std::array<std::array<double, 3>, kNodesPerElement> grad{};
        for (std::size_t a = 0; a < kNodesPerElement; ++a) {
          std::array<double, 3> s{};
          for (int d = 0; d < 3; ++d) s[d] = 2.0 * kLocalNodeOffsets[a][d] - 1.0;
          const double fx = 1.0 + s[0] * xi[0];
          const double fy = 1.0 + s[1] * xi[1];
          const double fz = 1.0 + s[2] * xi[2];
          grad[a][0] = 0.125 * s[0] * fy * fz * inv_j[0];
          grad[a][1] = 0.125 * fx * s[1] * fz * inv_j[1];
          grad[a][2] = 0.125 * fx * fy * s[2] * inv_j[2];
        }
        // strain-displacement matrix, 6 x 24
        std::array<double, 6 * n> b{};
        for (std::size_t a = 0; a < kNodesPerElement; ++a) {
          const auto [dx, dy, dz] = grad[a];
          const std::size_t col = 3 * a;
          b[0 * n + col + 0] = dx;
          b[1 * n + col + 1] = dy;
          b[2 * n + col + 2] = dz;
          b[3 * n + col + 1] = dz;
          b[3 * n + col + 2] = dy;
          b[4 * n + col + 0] = dz;
          b[4 * n + col + 2] = dx;
          b[5 * n + col + 0] = dy;
          b[5 * n + col + 1] = dx;
        }
        std::array<double, 6 * n> cb{};
        for (std::size_t r = 0; r < 6; ++r)
          for (std::size_t s = 0; s < 6; ++s) {
            const double crs = c[r * 6 + s];
            if (crs == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) cb[r * n + j] += crs * b[s * n + j];
          }
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t r = 0; r < 6; ++r) {
            const double bri = b[r * n + i];
            if (bri == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out.ke[i * n + j] += det_j * bri * cb[r * n + j];
          }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (out.ke[i * n + j] + out.ke[j * n + i]);
      out.ke[i * n + j] = avg;
      out.ke[j * n + i] = avg;
    }
  return out;
}

double simp_scale(double rho, const SimpParams& params) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("simp_scale: density must lie in [0, 1], got " +
                                std::to_string(rho));
  }
  if (rho == 1.0) return 1.0;
  return params.rho_min + (1.0 - params.rho_min) * std::pow(rho, params.penalty);
}

DenseMatrix assemble_dense_k(const DofMap& dofs, const UnitStiffness& unit_ke,
                             std::span<const double> rho, const SimpParams& params,
                             std::span<const std::uint8_t> fixed) {
  if (dofs.n_dof > kDenseAssemblyLimit) {
    throw std::length_error("assemble_dense_k: " + std::to_string(dofs.n_dof) +
                            " DOFs exceeds the dense oracle limit of " +
                            std::to_string(kDenseAssemblyLimit));
  }
  if (rho.size() != dofs.n_elem) {
    throw std::invalid_argument("assemble_dense_k: density length does not match element count");
  }
  DenseMatrix k{dofs.n_dof, std::vector<double>(dofs.n_dof * dofs.n_dof, 0.0)};
  for (std::size_t e = 0; e < dofs.n_elem; ++e) {
    const double scale = simp_scale(rho[e], params);
    const auto row = dofs.row(e);
    for (std::size_t i = 0; i < kDofsPerElement; ++i)
      for (std::size_t j = 0; j < kDofsPerElement; ++j) k(row[i], row[j]) += scale * unit_ke(i, j);
  }
  if (!fixed.empty()) {
    for (std::size_t d = 0; d < k.n; ++d) {
      if (!fixed[d]) continue;
      for (std::size_t j = 0; j < k.n; ++j) {
        k(d, j) = 0.0;
        k(j, d) = 0.0;
      }
    }
  }
  return k;
}

}  // namespace topopt
