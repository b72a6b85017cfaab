#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "topopt/element.hpp"
#include "topopt/mesh.hpp"
#include "topopt/precision.hpp"

namespace topopt {

enum class Variant { three_stage, fused };
enum class ScatterMode { serial, parallel_atomic };

std::string_view to_string(Variant v) noexcept;
std::string_view to_string(ScatterMode m) noexcept;
/// Accepts "three-stage", "three_stage" or "fused".
Variant parse_variant(std::string_view name);

/// Symmetric linear map on R^n. Constrained DOFs (if any) are handled by the
/// implementation: project() zeroes them and apply() returns zero there.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  [[nodiscard]] virtual std::size_t size() const noexcept = 0;
  virtual void apply(std::span<const double> v, std::span<double> w) const = 0;
  /// Default implementation widens to double.
  virtual void apply(std::span<const float> v, std::span<float> w) const;
  /// The exact operator this one approximates, applied in double. Reduced
  /// precision operators override it; by default it is apply().
  virtual void apply_reference(std::span<const double> v, std::span<double> w) const {
    apply(v, w);
  }
  /// Jacobi diagonal, 1 on constrained DOFs.
  [[nodiscard]] virtual std::vector<double> diagonal() const = 0;
  virtual void project(std::span<double> /*v*/) const {}
  /// Working precision a solver should run in for this operator.
  [[nodiscard]] virtual Precision precision() const noexcept { return Precision::fp64; }
};

struct OperatorOptions {
  Precision precision = Precision::fp64;
  Variant variant = Variant::fused;
  ScatterMode scatter = ScatterMode::serial;
  unsigned threads = 0;  // 0 = hardware concurrency; only used by parallel_atomic
};

/// Per-element work arrays of the three-stage pipeline (n_elem x 24 each).
template <typename T>
struct StageBuffers {
  std::vector<T> u_elem;
  std::vector<T> f_elem;
};

/// Element-by-element K(rho) v without assembling K.
///
/// FP64 computes in double. FP32 stores and accumulates in float; its
/// three-stage scatter reduces into a double buffer before the cast back.
/// BF16 is FP32 storage with the unit element matrix and every gathered
/// value rounded to BF16; products accumulate in FP32 and the SIMP scale
/// k_e is applied to the FP32 result.
///
/// The typed entry points require T to be the storage type of the precision
/// (double for FP64, float otherwise) and throw std::logic_error if not.
class MatFreeOperator final : public LinearOperator {
 public:
  MatFreeOperator(std::shared_ptr<const DofMap> dofs, const UnitStiffness& unit_ke,
                  std::span<const double> density, const SimpParams& simp,
                  std::vector<std::uint8_t> fixed, OperatorOptions options = {});

  [[nodiscard]] std::size_t size() const noexcept override { return dofs_->n_dof; }
  [[nodiscard]] std::size_t n_elem() const noexcept { return dofs_->n_elem; }
  void apply(std::span<const double> v, std::span<double> w) const override;
  void apply(std::span<const float> v, std::span<float> w) const override;
  /// Unquantized FP64 matvec, serial.
  void apply_reference(std::span<const double> v, std::span<double> w) const override;
  [[nodiscard]] std::vector<double> diagonal() const override { return jacobi_diagonal(); }
  void project(std::span<double> v) const override;
  [[nodiscard]] Precision precision() const noexcept override { return options_.precision; }

  [[nodiscard]] const OperatorOptions& options() const noexcept { return options_; }
  [[nodiscard]] const DofMap& dof_map() const noexcept { return *dofs_; }
  [[nodiscard]] std::span<const std::uint8_t> fixed() const noexcept { return fixed_; }
  [[nodiscard]] std::span<const double> element_scales() const noexcept { return scale64_; }

  /// Sum over incident (e, l) of k_e K[l,l] in this operator's precision.
  [[nodiscard]] std::vector<double> jacobi_diagonal() const;

  template <typename T>
  void matvec_three_stage(std::span<const T> v, std::span<T> w) const;
  template <typename T>
  void matvec_fused(std::span<const T> v, std::span<T> w) const;

  // Individual three-stage passes, exposed so they can be timed separately.
  template <typename T>
  void gather(std::span<const T> v, StageBuffers<T>& buf) const;
  template <typename T>
  void element_products(StageBuffers<T>& buf) const;
  template <typename T>
  void scatter(const StageBuffers<T>& buf, std::span<T> w) const;

 private:
  template <typename T>
  void check_storage(std::size_t v_size, std::size_t w_size) const;
  template <typename T>
  void fused_kernel(std::span<const T> v, std::span<T> w, const T* ke, const T* s, bool bf16,
                    unsigned threads) const;
  template <typename T>
  [[nodiscard]] const T* element_matrix() const noexcept;
  template <typename T>
  [[nodiscard]] const T* scales() const noexcept;
  [[nodiscard]] unsigned thread_count() const noexcept;

  std::shared_ptr<const DofMap> dofs_;
  std::vector<std::uint8_t> fixed_;
  OperatorOptions options_;
  SimpParams simp_;
  ElementMatrix ke64_{};
  std::vector<float> ke32_;  // FP32 or BF16-rounded copy
  std::vector<double> scale64_;
  std::vector<float> scale32_;
};

}  // namespace topopt
