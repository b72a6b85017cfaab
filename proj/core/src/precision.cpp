#include "topopt/precision.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace topopt {

std::string_view to_string(Precision p) noexcept {
  switch (p) {
    case Precision::fp64:
      return "fp64";
    case Precision::fp32:
      return "fp32";
    case Precision::bf16:
      return "bf16";
  }
  return "unknown";
}

Precision parse_precision(std::string_view name) {
  if (name == "fp64") return Precision::fp64;
  if (name == "fp32") return Precision::fp32;
  if (name == "bf16") return Precision::bf16;
  throw std::invalid_argument("unknown precision '" + std::string(name) +
                              "' (expected fp64, fp32 or bf16)");
}

double unit_roundoff(Precision p) noexcept {
  switch (p) {
    case Precision::fp64:
      return std::ldexp(1.0, -53);
    case Precision::fp32:
      return std::ldexp(1.0, -24);
    case Precision::bf16:
      return std::ldexp(1.0, -8);
  }
  return 0.0;
}

std::vector<double> quantize_vector(std::span<const double> v, Precision p) {
  std::vector<double> out(v.begin(), v.end());
  switch (p) {
    case Precision::fp64:
      break;
    case Precision::fp32:
      for (auto& x : out) x = static_cast<float>(x);
      break;
    case Precision::bf16:
      for (auto& x : out) x = round_to_bf16(static_cast<float>(x));
      break;
  }
  return out;
}

}  // namespace topopt
