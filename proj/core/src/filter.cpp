#include "topopt/filter.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

namespace topopt {

FilterOperator build_cone_filter(const StructuredMesh& mesh, double r_min) {
  if (!(r_min > 0.0)) {
    throw std::invalid_argument("build_cone_filter: radius must be positive, got " +
                                std::to_string(r_min));
  }
  if (r_min < 1.0) {
    std::clog << "warning: filter radius " << r_min << " < 1 gives an identity filter\n";
  }
  FilterOperator f;
  f.n_elem = mesh.n_elem();
  f.radius = r_min;
  f.offsets.reserve(f.n_elem + 1);
  f.offsets.push_back(0);

  const int reach = static_cast<int>(std::ceil(r_min)) - 1;
  const auto nx = static_cast<int>(mesh.nelx);
  const auto ny = static_cast<int>(mesh.nely);
  const auto nz = static_cast<int>(mesh.nelz);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t row_begin = f.weights.size();
        double sum = 0.0;
        for (int dk = -reach; dk <= reach; ++dk) {
          for (int dj = -reach; dj <= reach; ++dj) {
            for (int di = -reach; di <= reach; ++di) {
              const int ii = i + di, jj = j + dj, kk = k + dk;
              if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny || kk >= nz) continue;
              const double w = r_min - std::sqrt(double(di * di + dj * dj + dk * dk));
              if (w <= 0.0) continue;
              f.neighbors.push_back(static_cast<std::uint32_t>(mesh.element_id(ii, jj, kk)));
              f.weights.push_back(w);
              sum += w;
            }
          }
        }
        for (std::size_t n = row_begin; n < f.weights.size(); ++n) f.weights[n] /= sum;
        f.offsets.push_back(f.weights.size());
      }
    }
  }
  return f;
}

void apply_filter(const FilterOperator& filter, std::span<const double> rho,
                  std::span<double> out) {
  if (rho.size() != filter.n_elem || out.size() != filter.n_elem) {
    throw std::invalid_argument("apply_filter: length does not match element count");
  }
  for (std::size_t e = 0; e < filter.n_elem; ++e) {
    double acc = 0.0;
    for (std::size_t n = filter.offsets[e]; n < filter.offsets[e + 1]; ++n) {
      acc += filter.weights[n] * rho[filter.neighbors[n]];
    }
    out[e] = acc;
  }
}

std::vector<double> apply_filter(const FilterOperator& filter, std::span<const double> rho) {
  std::vector<double> out(filter.n_elem);
  apply_filter(filter, rho, out);
  return out;
}

void apply_filter_transpose(const FilterOperator& filter, std::span<const double> s,
                            std::span<double> out) {
  if (s.size() != filter.n_elem || out.size() != filter.n_elem) {
    throw std::invalid_argument("apply_filter_transpose: length does not match element count");
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t e = 0; e < filter.n_elem; ++e) {
    for (std::size_t n = filter.offsets[e]; n < filter.offsets[e + 1]; ++n) {
      out[filter.neighbors[n]] += filter.weights[n] * s[e];
    }
  }
}

std::vector<double> apply_filter_transpose(const FilterOperator& filter,
                                           std::span<const double> s) {
  std::vector<double> out(filter.n_elem);
  apply_filter_transpose(filter, s, out);
  return out;
}

}  // namespace topopt
