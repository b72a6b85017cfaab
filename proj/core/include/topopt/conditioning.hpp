#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "topopt/operator.hpp"

namespace topopt {

struct EigenEstimate {
  double value = 0.0;
  int steps = 0;
  bool capped = false;          // step limit hit before the tolerance
  std::vector<double> history;  // estimate after each step
};

/// Unit-norm start vector from a generator keyed by (seed, n), zero on the
/// operator's constrained DOFs.
std::vector<double> seeded_start_vector(const LinearOperator& op, std::uint64_t seed);

/// Largest eigenvalue by normalized power iteration with Rayleigh quotients.
/// A capped estimate is a lower bound.
EigenEstimate power_iteration(const LinearOperator& op, int max_steps = 50, double rel_tol = 1e-6,
                              std::uint64_t seed = 42);

/// Smallest eigenvalue by inverse iteration: y = K^-1 x by PCG, estimate
/// 1 / (x^T y) with x normalized, then x = y / |y|.
EigenEstimate inverse_iteration(const LinearOperator& op, double rel_tol = 1e-4,
                                std::uint64_t seed = 123, double inner_tol = 1e-8,
                                int inner_cap = 2000, int max_steps = 6);

struct KappaConfig {
  int power_steps = 50;
  double power_tol = 1e-6;
  std::uint64_t power_seed = 42;
  int inverse_steps = 6;
  double inverse_tol = 1e-4;
  std::uint64_t inverse_seed = 123;
  double inner_tol = 1e-8;
  int inner_cap = 2000;
};

/// Unit roundoff threshold below which BF16 refinement is guaranteed to
/// contract (eps * kappa < 1).
inline constexpr double kBf16KappaThreshold = 256.0;

struct KappaReport {
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  double kappa = 0.0;
  double eps_kappa = 0.0;  // 2^-8 kappa
  bool threshold_exceeded = false;
  int power_steps = 0;
  int inverse_steps = 0;
  bool capped = false;
};

KappaReport estimate_kappa(const LinearOperator& op, const KappaConfig& config = {});

/// One row of a conditioning study.
struct KappaRow {
  std::size_t n_elem = 0;
  double penalty = 0.0;
  KappaReport report;
};

/// diag(d); no constrained DOFs.
class DiagonalOperator final : public LinearOperator {
 public:
  explicit DiagonalOperator(std::vector<double> d) : d_(std::move(d)) {}
  [[nodiscard]] std::size_t size() const noexcept override { return d_.size(); }
  void apply(std::span<const double> v, std::span<double> w) const override;
  [[nodiscard]] std::vector<double> diagonal() const override { return d_; }

 private:
  std::vector<double> d_;
};

/// alpha * K.
class ScaledOperator final : public LinearOperator {
 public:
  ScaledOperator(const LinearOperator& base, double alpha) : base_(base), alpha_(alpha) {}
  [[nodiscard]] std::size_t size() const noexcept override { return base_.size(); }
  void apply(std::span<const double> v, std::span<double> w) const override;
  [[nodiscard]] std::vector<double> diagonal() const override;
  void project(std::span<double> v) const override { base_.project(v); }

 private:
  const LinearOperator& base_;
  double alpha_;
};

/// K + sigma I on the unconstrained DOFs.
class ShiftedOperator final : public LinearOperator {
 public:
  ShiftedOperator(const LinearOperator& base, double sigma) : base_(base), sigma_(sigma) {}
  [[nodiscard]] std::size_t size() const noexcept override { return base_.size(); }
  void apply(std::span<const double> v, std::span<double> w) const override;
  [[nodiscard]] std::vector<double> diagonal() const override;
  void project(std::span<double> v) const override { base_.project(v); }

 private:
  const LinearOperator& base_;
  double sigma_;
};

}  // namespace topopt
