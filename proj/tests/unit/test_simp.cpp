#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "topopt/simp.hpp"

namespace topopt {
namespace {

TEST(Heaviside, MapsEndpointsExactly) {
  for (double beta : {1.0, 4.0, 16.0, 32.0, 64.0}) {
    const ProjectionParams p{beta, 0.5};
    EXPECT_EQ(heaviside_project(0.0, p), 0.0) << beta;
    EXPECT_EQ(heaviside_project(1.0, p), 1.0) << beta;
    EXPECT_NEAR(heaviside_project(0.5, p), 0.5, 1e-15) << beta;
  }
}

TEST(Heaviside, DerivativeMatchesFiniteDifferences) {
  for (double beta : {1.0, 8.0, 32.0}) {
    const ProjectionParams p{beta, 0.5};
    for (double x = 0.05; x < 1.0; x += 0.1) {
      const double h = 1e-6;
      const double fd = (heaviside_project(x + h, p) - heaviside_project(x - h, p)) / (2 * h);
      EXPECT_NEAR(heaviside_derivative(x, p), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Heaviside, VectorFormsMatchScalar) {
  const ProjectionParams p{16.0, 0.5};
  const std::vector<double> x{0.0, 0.2, 0.49, 0.5, 0.8, 1.0};
  const auto h = heaviside_project(x, p);
  const auto d = heaviside_derivative(x, p);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(h[i], heaviside_project(x[i], p));
    EXPECT_EQ(d[i], heaviside_derivative(x[i], p));
    EXPECT_GE(h[i], 0.0);
    EXPECT_LE(h[i], 1.0);
  }
  EXPECT_TRUE(std::is_sorted(h.begin(), h.end()));
}

TEST(Schedule, StandardPhases) {
  const auto s = ContinuationSchedule::standard();
  EXPECT_EQ(s.total_iterations(), 120);
  EXPECT_EQ(s.at(1).penalty, 1.5);
  EXPECT_EQ(s.at(1).rmin, 1.5);
  EXPECT_EQ(s.at(16).penalty, 3.5);
  EXPECT_EQ(s.at(41).beta, 16.0);
  EXPECT_EQ(s.at(66).move, 0.05);
  EXPECT_EQ(s.at(120).beta, 32.0);
  EXPECT_DOUBLE_EQ(s.at(120).rmin, 1.2);
  EXPECT_THROW((void)s.at(0), std::out_of_range);
  EXPECT_THROW((void)s.at(121), std::out_of_range);
}

TEST(Schedule, ParametersAreMonotoneAndRadiusContinuous) {
  const auto s = ContinuationSchedule::standard();
  for (int t = 2; t <= s.total_iterations(); ++t) {
    const auto a = s.at(t - 1);
    const auto b = s.at(t);
    EXPECT_GE(b.penalty, a.penalty);
    EXPECT_GE(b.beta, a.beta);
    EXPECT_LE(b.move, a.move);
    EXPECT_LE(b.rmin, a.rmin + 1e-15);
    EXPECT_LE(a.rmin - b.rmin, 0.02);
  }
}

TEST(Oc, HitsVolumeTargetWithinMoveLimits) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 500;
  std::vector<double> rho(n), dc(n), dv(n, 1.0 / n);
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = 0.3;
    dc[i] = -std::exp(3.0 * u(gen));
  }
  OcParams p;
  p.move = 0.1;
  const auto next = oc_update(rho, dc, dv, 0.3, p);
  EXPECT_NEAR(mean(next), 0.3, 1e-6);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_GE(next[i], std::max(0.0, rho[i] - p.move) - 1e-15);
    EXPECT_LE(next[i], std::min(1.0, rho[i] + p.move) + 1e-15);
  }
  const auto hi = std::max_element(dc.begin(), dc.end()) - dc.begin();
  const auto lo = std::min_element(dc.begin(), dc.end()) - dc.begin();
  EXPECT_LT(next[static_cast<std::size_t>(hi)], next[static_cast<std::size_t>(lo)]);
}

TEST(Oc, CustomVolumeFunctionIsDriven) {
  const std::vector<double> rho(100, 0.5), dc(100, -1.0), dv(100, 0.01);
  const VolumeFunction squares = [](std::span<const double> r) {
    double s = 0.0;
    for (double x : r) s += x * x;
    return s / static_cast<double>(r.size());
  };
  const auto next = oc_update(rho, dc, dv, 0.2, {}, squares);
  EXPECT_NEAR(squares(next), 0.2, 1e-6);
}

TEST(Oc, RejectsInvalidGradients) {
  const std::vector<double> rho(4, 0.5), dv(4, 0.25);
  const std::vector<double> dc_pos{-1.0, 0.5, -1.0, -1.0};
  EXPECT_THROW(oc_update(rho, dc_pos, dv, 0.5, {}), std::invalid_argument);
  const std::vector<double> dc(4, -1.0), dv_zero{0.25, 0.0, 0.25, 0.25};
  EXPECT_THROW(oc_update(rho, dc, dv_zero, 0.5, {}), std::invalid_argument);
}

TEST(Grayness, ExtremesAndMidpoint) {
  EXPECT_EQ(grayness(std::vector<double>{0.0, 1.0, 1.0, 0.0}), 0.0);
  EXPECT_EQ(grayness(std::vector<double>(10, 0.5)), 1.0);
  EXPECT_NEAR(grayness(std::vector<double>{0.25, 0.75}), 0.75, 1e-15);
}

// Compliance of the projected, filtered field, solved densely.
double dense_compliance(const oracle::SmallProblem& sp, const FilterOperator& filter,
                        const ProjectionParams& proj, const SimpParams& simp,
                        const std::vector<double>& rho) {
  const auto phys = heaviside_project(apply_filter(filter, rho), proj);
  std::vector<double> s(phys.size());
  for (std::size_t e = 0; e < s.size(); ++e)
    s[e] = oracle::simp_modulus(phys[e], simp.penalty, simp.rho_min);
  const auto k = oracle::assemble(sp.mesh, oracle::hex_stiffness(0.3, 1, 1, 1), s, sp.fixed);
  const auto u = oracle::dense_solve(k, sp.load, sp.fixed);
  return compliance(u, sp.load);
}

TEST(Sensitivities, MatchCentralDifferencesOfDenseCompliance) {
  const auto sp = oracle::clamped_beam(3, 2, 2);
  const auto dofs = build_dof_map(sp.mesh);
  const auto ke = compute_unit_ke();
  const auto filter = build_cone_filter(sp.mesh, 1.5);
  const ProjectionParams proj{4.0, 0.5};
  const SimpParams simp{3.0, 1e-9};
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> dist(0.3, 0.8);
  std::vector<double> rho(sp.mesh.n_elem());
  for (auto& r : rho) r = dist(gen);

  const auto rho_bar = apply_filter(filter, rho);
  const auto phys = heaviside_project(rho_bar, proj);
  std::vector<double> s(phys.size());
  for (std::size_t e = 0; e < s.size(); ++e) s[e] = oracle::simp_modulus(phys[e], 3.0, 1e-9);
  const auto k = oracle::assemble(sp.mesh, oracle::hex_stiffness(0.3, 1, 1, 1), s, sp.fixed);
  const auto u = oracle::dense_solve(k, sp.load, sp.fixed);
  const auto grad = sensitivities(u, rho_bar, proj, simp, ke, dofs, filter);

  for (std::size_t e = 0; e < rho.size(); ++e) {
    const double h = 1e-6;
    auto plus = rho, minus = rho;
    plus[e] += h;
    minus[e] -= h;
    const double fd = (dense_compliance(sp, filter, proj, simp, plus) -
                       dense_compliance(sp, filter, proj, simp, minus)) /
                      (2 * h);
    EXPECT_NEAR(grad[e], fd, 1e-5 * std::abs(fd)) << "element " << e;
    EXPECT_LT(grad[e], 0.0);
  }
}

TEST(Sensitivities, ElementEnergiesAreNonNegativeQuadraticForms) {
  const auto mesh = build_mesh(2, 2, 1);
  const auto dofs = build_dof_map(mesh);
  const auto ke = compute_unit_ke();
  const auto u = oracle::random_vector(mesh.n_dof(), 11);
  const auto energy = element_energies(u, ke, dofs);
  const auto ref_ke = oracle::hex_stiffness(0.3, 1, 1, 1);
  for (std::size_t e = 0; e < energy.size(); ++e) {
    const auto row = dofs.row(e);
    Eigen::VectorXd ue(24);
    for (int j = 0; j < 24; ++j) ue(j) = u[row[static_cast<std::size_t>(j)]];
    const double ref = ue.dot(ref_ke * ue);
    EXPECT_NEAR(energy[e], ref, 1e-12 * ref);
    EXPECT_GE(energy[e], 0.0);
  }
  const std::vector<double> shifted(mesh.n_dof(), 3.0);
  for (double x : element_energies(shifted, ke, dofs)) EXPECT_NEAR(x, 0.0, 1e-12);
}

class ShortRun : public ::testing::Test {
 protected:
  static SimpHistory run(double restart_factor, VolumeMeasure volume = VolumeMeasure::design) {
    const auto preset = make_preset("cantilever", 0.1);
    SimpConfig cfg;
    cfg.schedule = ContinuationSchedule::constant(12, 3.0, 2.0, 0.2, 1.5);
    cfg.valid_grayness = 1.0;
    cfg.restart_factor = restart_factor;
    cfg.volume = volume;
    return run_simp(preset, cfg);
  }
};

TEST_F(ShortRun, HistoryInvariants) {
  int observed = 0;
  const auto preset = make_preset("cantilever", 0.1);
  SimpConfig cfg;
  cfg.schedule = ContinuationSchedule::constant(12, 3.0, 2.0, 0.2, 1.5);
  cfg.valid_grayness = 1.0;
  const auto h = run_simp(preset, cfg, [&](const SimpRecord&) { ++observed; });
  ASSERT_EQ(h.records.size(), 12u);
  EXPECT_EQ(observed, 12);
  EXPECT_EQ(h.preset, "cantilever");
  EXPECT_EQ(h.final_rho.size(), preset.mesh.n_elem());
  long long cg = 0;
  double best = std::numeric_limits<double>::infinity();
  double prev_selected = std::numeric_limits<double>::infinity();
  for (const auto& r : h.records) {
    cg += r.cg_iters;
    EXPECT_TRUE(r.cg_converged);
    EXPECT_NEAR(r.volume, preset.volume_fraction, 1e-6);
    EXPECT_TRUE(r.valid);
    best = std::min(best, r.compliance);
    EXPECT_EQ(r.selected_compliance, best);
    EXPECT_LE(r.selected_compliance, prev_selected);
    prev_selected = r.selected_compliance;
  }
  EXPECT_EQ(cg, h.total_cg_iters);
  ASSERT_TRUE(h.selected.has_value());
  EXPECT_EQ(h.selected->compliance, best);
  EXPECT_EQ(h.records[static_cast<std::size_t>(h.selected->iter - 1)].compliance, best);
  EXPECT_LT(h.records.back().compliance, h.records.front().compliance);
  for (double x : h.final_rho) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST_F(ShortRun, RestartReevaluatesTheSelectedSnapshot) {
  // A factor below one makes every non-restart iteration trigger a restart.
  const auto h = run(0.9);
  int restarted = 0;
  for (std::size_t t = 1; t < h.records.size(); ++t) {
    const auto& prev = h.records[t - 1];
    const auto& cur = h.records[t];
    const bool triggered = !prev.restarted && prev.compliance > 0.9 * prev.selected_compliance;
    EXPECT_EQ(cur.restarted, triggered) << "iteration " << cur.iter;
    if (cur.restarted) {
      ++restarted;
      EXPECT_NEAR(cur.compliance, prev.selected_compliance, 1e-4 * cur.compliance);
    }
  }
  EXPECT_GT(restarted, 0);
  const auto& last = h.records.back();
  const bool pending = !last.restarted && last.compliance > 0.9 * last.selected_compliance;
  EXPECT_EQ(h.restart_count, restarted + (pending ? 1 : 0));
}

TEST_F(ShortRun, NoRestartsAtTheDefaultFactor) {
  const auto h = run(1.12);
  EXPECT_EQ(h.restart_count, 0);
  for (const auto& r : h.records) EXPECT_FALSE(r.restarted);
}

TEST_F(ShortRun, ProjectedVolumeMeasureHoldsTheProjectedField) {
  const auto h = run(1.12, VolumeMeasure::projected);
  for (const auto& r : h.records) EXPECT_NEAR(r.volume, 0.3, 1e-6);
}

TEST(Simp, SelectsNothingWhenNoIterationQualifies) {
  SimpConfig cfg;
  cfg.schedule = ContinuationSchedule::constant(3, 1.5, 1.0, 0.2, 1.5);
  const auto h = run_simp(make_preset("cantilever", 0.1), cfg);
  EXPECT_FALSE(h.selected.has_value());
  for (const auto& r : h.records) {
    EXPECT_FALSE(r.valid);
    EXPECT_EQ(r.selected_compliance, 0.0);
  }
}

TEST(Simp, MaxIterationsTruncatesTheSchedule) {
  SimpConfig cfg;
  cfg.max_iterations = 4;
  const auto h = run_simp(make_preset("cantilever", 0.1), cfg);
  ASSERT_EQ(h.records.size(), 4u);
  EXPECT_EQ(h.records.back().penalty, 1.5);
}

}  // namespace
}  // namespace topopt
