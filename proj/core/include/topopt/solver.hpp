#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "topopt/operator.hpp"
#include "topopt/precision.hpp"

namespace topopt {

/// Jacobi diagonal has a non-positive entry.
class OperatorInvalid : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared in the CG recurrence.
class SolverDivergence : public std::runtime_error {
 public:
  SolverDivergence(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  [[nodiscard]] int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

struct CgConfig {
  double rel_tol = 1e-5;
  int max_iter = 1000;
  bool record_history = true;
  /// Every this many iterations (0 disables) the true residual is checked.
  /// FP64 solves replace the recursive residual with it; reduced-precision
  /// solves compare it against the FP64 verification threshold and keep the
  /// best iterate.
  int true_residual_interval = 50;
  /// For BF16 operators, also round the residual and search direction to
  /// BF16 after every update. Off by default: only the matvec is quantized.
  bool bf16_vectors = false;
  /// A converged report must also pass an FP64 recomputation of
  /// ||f - K u|| / ||f|| against the exact operator: <= rel_tol for FP64
  /// and <= reduced_precision_slack * rel_tol for FP32/BF16.
  double reduced_precision_slack = 2.0;
  /// Reduced precision only: replace the recursive residual at each check
  /// with one recomputed through the exact FP64 operator.
  bool replace_in_fp64 = false;
  /// Stop with Termination::stagnation after this many consecutive failed
  /// verifications that did not lower the FP64 residual (0 disables).
  int max_failed_verifications = 3;
};

enum class Termination { converged, zero_rhs, max_iter, breakdown, stagnation, max_outer };

std::string_view to_string(Termination t) noexcept;

/// One outer correction of iterative refinement.
struct OuterStep {
  int outer = 0;
  double rel_residual = 0.0;  // before this correction is applied
  int inner_iterations = 0;   // of the correction solve that followed
};

struct SolveReport {
  int iterations = 0;  // CG iterations; total inner iterations for refinement
  bool converged = false;
  double final_rel_residual = 0.0;     // unpreconditioned ||f - K u|| / ||f||, working operator
  double verified_rel_residual = 0.0;  // same, recomputed in FP64 with the exact operator
  int failed_verifications = 0;
  std::vector<double> residual_history;
  double wall_time = 0.0;  // seconds
  double compliance = 0.0;
  Termination termination = Termination::max_iter;
  Precision precision = Precision::fp64;
  int outer_iterations = 0;
  std::vector<OuterStep> outer_trace;
};

struct SolveResult {
  std::vector<double> u;
  SolveReport report;
};

/// Jacobi-preconditioned CG in the operator's working precision (double for
/// FP64, float otherwise). Stops once the true unpreconditioned relative
/// residual is <= rel_tol, or at max_iter. x0 seeds a warm start.
SolveResult pcg(const LinearOperator& op, std::span<const double> f, std::span<const double> diag,
                const CgConfig& config = {}, std::span<const double> x0 = {});

/// f^T u.
double compliance(std::span<const double> u, std::span<const double> f);

/// ||f - K u|| / ||f|| with the operator applied in double.
double relative_residual(const LinearOperator& op, std::span<const double> u,
                         std::span<const double> f);

/// CG straight on the BF16 operator, no refinement.
SolveResult solve_bf16_plain(const LinearOperator& op_bf16, std::span<const double> f,
                             const CgConfig& config = {});

struct IrConfig {
  double rel_tol = 1e-5;
  double inner_tol = 1e-3;
  int max_outer = 8;
  int inner_max_iter = 1000;
  /// Stop when the outer residual falls by less than this fraction on two
  /// consecutive corrections.
  double stagnation_reduction = 0.05;
};

/// Residual correction: r = f - K u in FP32, e ~ K^-1 r by BF16 inner CG,
/// u += e.
SolveResult iterative_refinement(const LinearOperator& op_fp32, const LinearOperator& op_bf16,
                                 std::span<const double> f, const IrConfig& config = {});

}  // namespace topopt
