#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace topopt {

enum class Precision { fp64, fp32, bf16 };

std::string_view to_string(Precision p) noexcept;
/// Accepts "fp64", "fp32", "bf16"; throws std::invalid_argument otherwise.
Precision parse_precision(std::string_view name);

/// Unit roundoff: 2^-53, 2^-24 and 2^-8 (the Carson-Higham convention for
/// BF16's 8-bit significand).
double unit_roundoff(Precision p) noexcept;

/// Nearest BF16-representable value, ties to even, kept in FP32 storage.
/// NaN and infinities pass through; overflow rounds to infinity.
inline float round_to_bf16(float x) noexcept {
  auto bits = std::bit_cast<std::uint32_t>(x);
  if ((bits & 0x7F800000u) == 0x7F800000u) return x;
  const std::uint32_t lsb = (bits >> 16) & 1u;
  bits += 0x7FFFu + lsb;
  bits &= 0xFFFF0000u;
  return std::bit_cast<float>(bits);
}

/// Elementwise cast: identity for FP64, FP64 -> FP32 for FP32, and FP32 then
/// BF16 rounding for BF16. Results are returned widened back to double.
std::vector<double> quantize_vector(std::span<const double> v, Precision p);

}  // namespace topopt
