#include "topopt/simp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

namespace topopt {

double heaviside_project(double rho_bar, const ProjectionParams& p) {
  if (rho_bar <= 0.0) return 0.0;
  if (rho_bar >= 1.0) return 1.0;
  const double a = std::tanh(p.beta * p.eta);
  const double num = a + std::tanh(p.beta * (rho_bar - p.eta));
  const double den = a + std::tanh(p.beta * (1.0 - p.eta));
  return std::clamp(num / den, 0.0, 1.0);
}

double heaviside_derivative(double rho_bar, const ProjectionParams& p) {
  const double den = std::tanh(p.beta * p.eta) + std::tanh(p.beta * (1.0 - p.eta));
  const double c = std::cosh(p.beta * (rho_bar - p.eta));
  return p.beta / (c * c) / den;
}

std::vector<double> heaviside_project(std::span<const double> rho_bar,
                                      const ProjectionParams& params) {
  std::vector<double> out(rho_bar.size());
  std::transform(rho_bar.begin(), rho_bar.end(), out.begin(),
                 [&](double x) { return heaviside_project(x, params); });
  return out;
}

std::vector<double> heaviside_derivative(std::span<const double> rho_bar,
                                         const ProjectionParams& params) {
  std::vector<double> out(rho_bar.size());
  std::transform(rho_bar.begin(), rho_bar.end(), out.begin(),
                 [&](double x) { return heaviside_derivative(x, params); });
  return out;
}

ContinuationSchedule::ContinuationSchedule(std::vector<ContinuationPhase> phases,
                                           double initial_rmin)
    : phases_(std::move(phases)), initial_rmin_(initial_rmin) {
  if (phases_.empty()) throw std::invalid_argument("ContinuationSchedule: no phases");
  int expect = 1;
  double last_p = 0.0;
  for (const auto& ph : phases_) {
    if (ph.first != expect || ph.last < ph.first) {
      throw std::invalid_argument(
          "ContinuationSchedule: phases must partition [1, N] in order; "
          "phase starting at " +
          std::to_string(ph.first) + " expected at " + std::to_string(expect));
    }
    if (ph.penalty < last_p) {
      throw std::invalid_argument("ContinuationSchedule: penalty must be nondecreasing");
    }
    if (!(ph.beta > 0.0) || !(ph.move > 0.0) || !(ph.rmin_target > 0.0)) {
      throw std::invalid_argument("ContinuationSchedule: beta, move and rmin must be positive");
    }
    last_p = ph.penalty;
    expect = ph.last + 1;
  }
}

ContinuationSchedule ContinuationSchedule::standard() {
  return ContinuationSchedule({{1, 15, 1.5, 1.0, 0.20, 1.5},
                               {16, 40, 3.5, 4.0, 0.15, 1.35},
                               {41, 65, 4.5, 16.0, 0.08, 1.25},
                               {66, 120, 4.5, 32.0, 0.05, 1.20}},
                              1.5);
}

ContinuationSchedule ContinuationSchedule::constant(int iterations, double penalty, double beta,
                                                    double move, double rmin) {
  return ContinuationSchedule({{1, iterations, penalty, beta, move, rmin}}, rmin);
}

ContinuationState ContinuationSchedule::at(int iteration) const {
  double start = initial_rmin_;
  for (const auto& ph : phases_) {
    if (iteration >= ph.first && iteration <= ph.last) {
      const double t =
          ph.last == ph.first ? 1.0 : double(iteration - ph.first) / double(ph.last - ph.first);
      return {ph.penalty, ph.beta, ph.move, start + t * (ph.rmin_target - start)};
    }
    start = ph.rmin_target;
  }
  throw std::out_of_range("ContinuationSchedule: iteration " + std::to_string(iteration) +
                          " outside [1, " + std::to_string(total_iterations()) + "]");
}

std::vector<double> element_energies(std::span<const double> u, const UnitStiffness& unit_ke,
                                     const DofMap& dofs) {
  if (u.size() != dofs.n_dof) throw std::invalid_argument("element_energies: u length mismatch");
  std::vector<double> out(dofs.n_elem);
  double ue[kDofsPerElement];
  for (std::size_t e = 0; e < dofs.n_elem; ++e) {
    const auto row = dofs.row(e);
    for (std::size_t j = 0; j < kDofsPerElement; ++j) ue[j] = u[row[j]];
    double energy = 0.0;
    for (std::size_t i = 0; i < kDofsPerElement; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < kDofsPerElement; ++j) acc += unit_ke(i, j) * ue[j];
      energy += ue[i] * acc;
    }
    out[e] = std::max(0.0, energy);
  }
  return out;
}

std::vector<double> physical_sensitivities(std::span<const double> u,
                                           std::span<const double> rho_phys, const SimpParams& simp,
                                           const UnitStiffness& unit_ke, const DofMap& dofs) {
  if (rho_phys.size() != dofs.n_elem) {
    throw std::invalid_argument("physical_sensitivities: density length mismatch");
  }
  auto out = element_energies(u, unit_ke, dofs);
  const double p = simp.penalty;
  for (std::size_t e = 0; e < out.size(); ++e) {
    const double slope = p == 1.0 ? 1.0 : std::pow(rho_phys[e], p - 1.0);
    out[e] = -p * (1.0 - simp.rho_min) * slope * out[e];
  }
  return out;
}

std::vector<double> chain_to_design(std::span<const double> grad_phys,
                                    std::span<const double> rho_filtered,
                                    const ProjectionParams& projection,
                                    const FilterOperator& filter) {
  std::vector<double> g(grad_phys.size());
  for (std::size_t e = 0; e < g.size(); ++e) {
    g[e] = grad_phys[e] * heaviside_derivative(rho_filtered[e], projection);
  }
  return apply_filter_transpose(filter, g);
}

std::vector<double> sensitivities(std::span<const double> u, std::span<const double> rho_filtered,
                                  const ProjectionParams& projection, const SimpParams& simp,
                                  const UnitStiffness& unit_ke, const DofMap& dofs,
                                  const FilterOperator& filter) {
  const auto rho_phys = heaviside_project(rho_filtered, projection);
  const auto dphys = physical_sensitivities(u, rho_phys, simp, unit_ke, dofs);
  return chain_to_design(dphys, rho_filtered, projection, filter);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double grayness(std::span<const double> rho) {
  if (rho.empty()) return 0.0;
  double s = 0.0;
  for (double r : rho) s += r * (1.0 - r);
  return 4.0 * s / static_cast<double>(rho.size());
}

std::vector<double> oc_update(std::span<const double> rho, std::span<const double> dc,
                              std::span<const double> dv, double volume_fraction,
                              const OcParams& params, const VolumeFunction& volume) {
  const std::size_t n = rho.size();
  if (dc.size() != n || dv.size() != n) throw std::invalid_argument("oc_update: length mismatch");
  if (!(volume_fraction > 0.0 && volume_fraction <= 1.0)) {
    throw std::invalid_argument("oc_update: volume fraction must lie in (0, 1]");
  }
  for (std::size_t e = 0; e < n; ++e) {
    if (dc[e] > 0.0) {
      throw std::invalid_argument("oc_update: positive compliance sensitivity " +
                                  std::to_string(dc[e]) + " at element " + std::to_string(e));
    }
    if (!(dv[e] > 0.0)) {
      throw std::invalid_argument("oc_update: non-positive volume sensitivity at element " +
                                  std::to_string(e));
    }
  }
  std::vector<double> lo(n), hi(n);
  for (std::size_t e = 0; e < n; ++e) {
    lo[e] = std::max(0.0, rho[e] - params.move);
    hi[e] = std::min(1.0, rho[e] + params.move);
  }
  std::vector<double> out(n);
  auto measure = [&](double lambda) {
    for (std::size_t e = 0; e < n; ++e) {
      const double b = -dc[e] / (lambda * dv[e]);
      out[e] = std::clamp(rho[e] * std::pow(b, params.damping), lo[e], hi[e]);
    }
    return volume ? volume(out) : mean(out);
  };

  double a = std::log(params.lambda_lo);
  double b = std::log(params.lambda_hi);
  const double v_a = measure(std::exp(a));
  if (std::abs(v_a - volume_fraction) <= params.bisect_tol) return out;
  const double v_b = measure(std::exp(b));
  if (std::abs(v_b - volume_fraction) <= params.bisect_tol) return out;
  if (!(v_a > volume_fraction && v_b < volume_fraction)) {
    throw std::runtime_error(
        "oc_update: cannot bracket the volume multiplier in [" + std::to_string(params.lambda_lo) +
        ", " + std::to_string(params.lambda_hi) + "]: volumes " + std::to_string(v_a) + " and " +
        std::to_string(v_b) + " vs target " + std::to_string(volume_fraction));
  }
  for (int it = 0; it < params.max_bisect; ++it) {
    const double mid = 0.5 * (a + b);
    const double v = measure(std::exp(mid));
    if (std::abs(v - volume_fraction) <= params.bisect_tol) return out;
    if (v > volume_fraction) {
      a = mid;
    } else {
      b = mid;
    }
  }
  throw std::runtime_error(
      "oc_update: bisection did not reach volume tolerance; multiplier "
      "interval [" +
      std::to_string(std::exp(a)) + ", " + std::to_string(std::exp(b)) + "]");
}

namespace {

std::vector<double> clamp_unit(std::vector<double> v) {
  for (auto& x : v) x = std::clamp(x, 0.0, 1.0);
  return v;
}

}  // namespace

SimpHistory run_simp(const ProblemPreset& preset, const SimpConfig& config,
                     const SimpObserver& observer) {
  using Clock = std::chrono::steady_clock;
  const auto run_start = Clock::now();
  const auto& mesh = preset.mesh;
  const std::size_t ne = mesh.n_elem();
  const double vf = preset.volume_fraction;
  const auto dofs = std::make_shared<const DofMap>(build_dof_map(mesh));
  const auto unit_ke = compute_unit_ke(config.nu, mesh.hx, mesh.hy, mesh.hz);
  const auto& f = preset.bcs.load;

  const int total = config.max_iterations > 0
                        ? std::min(config.max_iterations, config.schedule.total_iterations())
                        : config.schedule.total_iterations();

  SimpHistory hist;
  hist.preset = std::string(preset.name());
  hist.precision = config.op.precision;
  hist.variant = config.op.variant;
  hist.cg_cap = config.cg.max_iter;
  hist.volume_fraction = vf;

  std::vector<double> rho(ne, vf);
  std::vector<double> u_prev;
  ContinuationState state = config.schedule.at(1);
  FilterOperator filter = build_cone_filter(mesh, state.rmin);
  bool restart_pending = false;

  for (int t = 1; t <= total; ++t) {
    const auto iter_start = Clock::now();
    state = config.schedule.at(t);
    if (std::abs(state.rmin - filter.radius) >= config.rmin_rebuild_step - 1e-12) {
      filter = build_cone_filter(mesh, state.rmin);
    }
    SimpRecord rec;
    rec.iter = t;
    rec.penalty = state.penalty;
    rec.beta = state.beta;
    rec.rmin = filter.radius;
    rec.move = state.move;
    if (restart_pending) {
      rho = hist.selected->rho;
      u_prev = hist.selected->u;
      rec.restarted = true;
      restart_pending = false;
    }

    const ProjectionParams proj{state.beta, config.eta};
    const auto rho_bar = clamp_unit(apply_filter(filter, rho));
    const auto rho_phys = heaviside_project(rho_bar, proj);
    const SimpParams simp{state.penalty, config.simp.rho_min};

    const MatFreeOperator op(dofs, unit_ke, rho_phys, simp, preset.bcs.fixed, config.op);
    const auto diag = op.jacobi_diagonal();
    SolveResult sol;
    try {
      sol = pcg(op, f, diag, config.cg,
                config.warm_start && !u_prev.empty() ? std::span<const double>(u_prev)
                                                     : std::span<const double>());
    } catch (const SolverDivergence& err) {
      throw SolverDivergence("SIMP iteration " + std::to_string(t) + ": " + err.what(),
                             err.iteration());
    }
    rec.compliance = sol.report.compliance;
    rec.cg_iters = sol.report.iterations;
    rec.cg_converged = sol.report.converged;
    rec.grayness = grayness(rho_phys);
    rec.valid = state.penalty >= config.valid_penalty && rec.grayness < config.valid_grayness;
    hist.total_cg_iters += rec.cg_iters;

    if (rec.valid && (!hist.selected || rec.compliance < hist.selected->compliance)) {
      hist.selected =
          SelectedIterate{t, rec.compliance, rec.grayness, state.penalty, rho, rho_phys, sol.u};
    }

    const auto dphys = physical_sensitivities(sol.u, rho_phys, simp, unit_ke, *dofs);
    const auto dc = chain_to_design(dphys, rho_bar, proj, filter);
    const std::vector<double> ones(ne, 1.0 / static_cast<double>(ne));
    const auto dv = chain_to_design(ones, rho_bar, proj, filter);

    VolumeFunction volume;
    if (config.volume == VolumeMeasure::projected) {
      volume = [&](std::span<const double> r) {
        return mean(heaviside_project(clamp_unit(apply_filter(filter, r)), proj));
      };
    }
    OcParams oc;
    oc.move = state.move;
    oc.bisect_tol = config.bisect_tol;
    rho = oc_update(rho, dc, dv, vf, oc, volume);
    rec.volume = volume ? volume(rho) : mean(rho);

    if (hist.selected) {
      rec.selected_compliance = hist.selected->compliance;
      if (!rec.restarted && rec.compliance > config.restart_factor * hist.selected->compliance) {
        restart_pending = true;
        ++hist.restart_count;
      }
    }
    u_prev = std::move(sol.u);
    rec.wall_s = std::chrono::duration<double>(Clock::now() - iter_start).count();
    hist.records.push_back(rec);
    if (observer) observer(rec);
  }
  hist.final_rho = std::move(rho);
  hist.wall_s = std::chrono::duration<double>(Clock::now() - run_start).count();
  return hist;
}

}  // namespace topopt
