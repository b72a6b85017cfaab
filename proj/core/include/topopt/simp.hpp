#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "topopt/element.hpp"
#include "topopt/filter.hpp"
#include "topopt/mesh.hpp"
#include "topopt/operator.hpp"
#include "topopt/solver.hpp"

namespace topopt {

struct ProjectionParams {
  double beta = 1.0;
  double eta = 0.5;
};

/// Smoothed Heaviside (tanh) projection. Maps 0 to 0 and 1 to 1 exactly.
double heaviside_project(double rho_bar, const ProjectionParams& params);
double heaviside_derivative(double rho_bar, const ProjectionParams& params);
std::vector<double> heaviside_project(std::span<const double> rho_bar,
                                      const ProjectionParams& params);
std::vector<double> heaviside_derivative(std::span<const double> rho_bar,
                                         const ProjectionParams& params);

struct ContinuationPhase {
  int first = 1;  // inclusive, 1-based
  int last = 1;   // inclusive
  double penalty = 3.0;
  double beta = 1.0;
  double move = 0.2;
  double rmin_target = 1.5;
};

struct ContinuationState {
  double penalty = 3.0;
  double beta = 1.0;
  double move = 0.2;
  double rmin = 1.5;
};

/// Staged ramp of penalty, projection sharpness, move limit and filter
/// radius. The radius moves linearly within a phase from the value the
/// previous phase ended on to the phase target.
class ContinuationSchedule {
 public:
  ContinuationSchedule(std::vector<ContinuationPhase> phases, double initial_rmin);

  /// Four phases over 120 iterations.
  static ContinuationSchedule standard();
  /// One phase of constant parameters.
  static ContinuationSchedule constant(int iterations, double penalty, double beta, double move,
                                       double rmin);

  [[nodiscard]] int total_iterations() const noexcept { return phases_.back().last; }
  [[nodiscard]] const std::vector<ContinuationPhase>& phases() const noexcept { return phases_; }
  [[nodiscard]] double initial_rmin() const noexcept { return initial_rmin_; }
  /// Parameters at a 1-based iteration. Throws std::out_of_range outside.
  [[nodiscard]] ContinuationState at(int iteration) const;

 private:
  std::vector<ContinuationPhase> phases_;
  double initial_rmin_;
};

/// u_e^T K_unit u_e per element, clamped at zero.
std::vector<double> element_energies(std::span<const double> u, const UnitStiffness& unit_ke,
                                     const DofMap& dofs);

/// dc/d(rho_phys) = -p (1 - rho_min) rho_phys^(p-1) u_e^T K_unit u_e.
std::vector<double> physical_sensitivities(std::span<const double> u,
                                           std::span<const double> rho_phys, const SimpParams& simp,
                                           const UnitStiffness& unit_ke, const DofMap& dofs);

/// Pulls a gradient w.r.t. projected densities back to design densities:
/// W^T (H'(rho_filtered) * g).
std::vector<double> chain_to_design(std::span<const double> grad_phys,
                                    std::span<const double> rho_filtered,
                                    const ProjectionParams& projection,
                                    const FilterOperator& filter);

/// Compliance gradient w.r.t. design densities, given the equilibrium u for
/// the projected field H(rho_filtered).
std::vector<double> sensitivities(std::span<const double> u, std::span<const double> rho_filtered,
                                  const ProjectionParams& projection, const SimpParams& simp,
                                  const UnitStiffness& unit_ke, const DofMap& dofs,
                                  const FilterOperator& filter);

struct OcParams {
  double move = 0.2;
  double damping = 0.5;
  double bisect_tol = 1e-6;
  int max_bisect = 500;
  double lambda_lo = 1e-300;
  double lambda_hi = 1e300;
};

/// Volume functional the bisection drives to the target; mean of the design
/// densities when empty.
using VolumeFunction = std::function<double(std::span<const double>)>;

/// Optimality-criteria step with bisection on the Lagrange multiplier.
/// Throws std::invalid_argument on a positive dc or non-positive dv and
/// std::runtime_error when the multiplier cannot be bracketed.
std::vector<double> oc_update(std::span<const double> rho, std::span<const double> dc,
                              std::span<const double> dv, double volume_fraction,
                              const OcParams& params, const VolumeFunction& volume = {});

/// 4/n sum rho (1 - rho).
double grayness(std::span<const double> rho);

double mean(std::span<const double> v);

enum class VolumeMeasure { design, projected };

struct SimpConfig {
  ContinuationSchedule schedule = ContinuationSchedule::standard();
  OperatorOptions op;
  bool warm_start = true;
  CgConfig cg{1e-5, 1000, false};
  SimpParams simp{3.0, 1e-9};
  double nu = 0.3;
  double eta = 0.5;
  double restart_factor = 1.12;
  double valid_penalty = 3.0;
  double valid_grayness = 0.25;
  double rmin_rebuild_step = 0.05;
  double bisect_tol = 1e-6;
  VolumeMeasure volume = VolumeMeasure::design;
  /// Stop after this many iterations (0 = the whole schedule).
  int max_iterations = 0;
};

struct SimpRecord {
  int iter = 0;
  double compliance = 0.0;
  int cg_iters = 0;
  double grayness = 0.0;  // of the projected field
  double penalty = 0.0;
  double beta = 0.0;
  double rmin = 0.0;
  double move = 0.0;
  double wall_s = 0.0;
  bool restarted = false;  // this iteration evaluated the selected snapshot
  bool valid = false;
  bool cg_converged = false;
  double volume = 0.0;               // mean design density after the OC step
  double selected_compliance = 0.0;  // after this iteration; 0 if none yet
};

struct SelectedIterate {
  int iter = 0;
  double compliance = 0.0;
  double grayness = 0.0;
  double penalty = 0.0;
  std::vector<double> rho;       // design densities evaluated at that iteration
  std::vector<double> rho_phys;  // projected field
  std::vector<double> u;
};

struct SimpHistory {
  std::string preset;
  Precision precision = Precision::fp64;
  Variant variant = Variant::fused;
  int cg_cap = 0;
  double volume_fraction = 0.0;
  std::vector<SimpRecord> records;
  std::optional<SelectedIterate> selected;
  int restart_count = 0;
  long long total_cg_iters = 0;
  double wall_s = 0.0;
  std::vector<double> final_rho;
};

using SimpObserver = std::function<void(const SimpRecord&)>;

/// Filter, project, solve, differentiate, OC update, restart check, for each
/// iteration of the schedule.
SimpHistory run_simp(const ProblemPreset& preset, const SimpConfig& config = {},
                     const SimpObserver& observer = {});

}  // namespace topopt
