#include "topopt/traffic.hpp"

#include <algorithm>
#include <stdexcept>

#include "topopt/mesh.hpp"

namespace topopt {

double scalar_bytes(Precision p) noexcept { return p == Precision::fp64 ? 8.0 : 4.0; }

TrafficReport traffic_model(Variant variant, Precision precision, bool include_indices) {
  const double w = scalar_bytes(precision);
  const double passes = variant == Variant::three_stage ? 4.0 : 2.0;
  TrafficReport r;
  r.bytes_element_data = passes * static_cast<double>(kDofsPerElement) * w;
  r.bytes_with_indices = r.bytes_element_data + kIndexBytesPerElement + kDensityBytesPerElement;
  r.flops_per_element = 2.0 * static_cast<double>(kDofsPerElement * kDofsPerElement);
  r.intensity_ideal = r.flops_per_element / r.bytes_element_data;
  r.intensity_profile = r.flops_per_element / r.bytes_with_indices;
  r.arithmetic_intensity = include_indices ? r.intensity_profile : r.intensity_ideal;
  return r;
}

RooflineConfig reference_gpu_roofline(Precision p) noexcept {
  constexpr double bandwidth = 1.008e12;
  switch (p) {
    case Precision::fp64:
      return {1.29e12, bandwidth};
    case Precision::fp32:
      return {82.6e12, bandwidth};
    case Precision::bf16:
      return {165.2e12, bandwidth};
  }
  return {0.0, bandwidth};
}

double roofline_bound(const RooflineConfig& config, double intensity) {
  if (!(config.peak_flops > 0.0 && config.bandwidth > 0.0 && intensity > 0.0)) {
    throw std::invalid_argument("roofline_bound: peak, bandwidth and intensity must be positive");
  }
  return std::min(config.peak_flops, intensity * config.bandwidth);
}

double effective_bandwidth(const TrafficReport& report, std::size_t n_elem, double wall_time_s) {
  if (!(wall_time_s > 0.0)) {
    throw std::invalid_argument("effective_bandwidth: wall time must be positive");
  }
  return report.bytes_with_indices * static_cast<double>(n_elem) / wall_time_s;
}

MemoryFootprint modeled_footprint(Variant variant, Precision precision, std::size_t n_elem,
                                  std::size_t n_dof) {
  const double w = scalar_bytes(precision);
  const auto ne = static_cast<double>(n_elem);
  MemoryFootprint m;
  m.global_vectors = 2.0 * static_cast<double>(n_dof) * w;
  m.index_table = ne * kIndexBytesPerElement;
  m.densities = ne * kDensityBytesPerElement;
  m.element_matrix = static_cast<double>(kDofsPerElement * kDofsPerElement) * w;
  if (variant == Variant::three_stage) {
    m.work_arrays = 2.0 * ne * static_cast<double>(kDofsPerElement) * w;
  }
  return m;
}

}  // namespace topopt
