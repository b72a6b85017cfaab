#pragma once

#include <cstddef>
#include <string_view>

#include "topopt/operator.hpp"
#include "topopt/precision.hpp"

namespace topopt {

/// Per-element DRAM traffic of one K*v call under the element-data model.
struct TrafficReport {
  double bytes_element_data = 0.0;    // bytes/element, u and f traffic only
  double bytes_with_indices = 0.0;    // + 24 32-bit edof entries + one density scalar
  double flops_per_element = 0.0;     // 2 * 24^2
  double intensity_ideal = 0.0;       // flops / element-data bytes
  double intensity_profile = 0.0;     // flops / bytes including indices and density
  double arithmetic_intensity = 0.0;  // whichever convention was requested
};

inline constexpr double kIndexBytesPerElement = 24.0 * 4.0;
inline constexpr double kDensityBytesPerElement = 4.0;

/// Bytes per stored scalar: 8 for FP64, 4 for FP32. BF16 values live in FP32
/// storage and are rounded on load, so they also move 4 bytes.
double scalar_bytes(Precision p) noexcept;

/// Three-stage moves each element vector four times (gather out, GEMM in,
/// GEMM out, scatter in); fused moves it twice (gather read, scatter write).
TrafficReport traffic_model(Variant variant, Precision precision, bool include_indices);

struct RooflineConfig {
  double peak_flops = 0.0;  // FLOP/s
  double bandwidth = 0.0;   // bytes/s

  [[nodiscard]] double ridge() const noexcept { return peak_flops / bandwidth; }
};

/// Ceilings of the reference GPU (RTX 4090: 1.008 TB/s; 1.29 / 82.6 / 165.2
/// TFLOP/s for FP64 / FP32 / BF16 tensor cores).
RooflineConfig reference_gpu_roofline(Precision p) noexcept;

/// min(peak, intensity * bandwidth). Throws on non-positive inputs.
double roofline_bound(const RooflineConfig& config, double intensity);

/// Modeled bytes moved (bytes_with_indices * n_elem) over wall time.
/// Throws std::invalid_argument if wall_time_s <= 0.
double effective_bandwidth(const TrafficReport& report, std::size_t n_elem, double wall_time_s);

/// Analytic footprint of the persistent buffers a matvec path keeps alive
/// (global vectors, edof, densities, element matrix, and for three-stage the
/// two n_elem x 24 work arrays). This is a model, not a measurement.
struct MemoryFootprint {
  double global_vectors = 0.0;
  double index_table = 0.0;
  double densities = 0.0;
  double element_matrix = 0.0;
  double work_arrays = 0.0;

  [[nodiscard]] double total() const noexcept {
    return global_vectors + index_table + densities + element_matrix + work_arrays;
  }
};

MemoryFootprint modeled_footprint(Variant variant, Precision precision, std::size_t n_elem,
                                  std::size_t n_dof);

}  // namespace topopt
