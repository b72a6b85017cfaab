#include "topopt/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "topopt/precision.hpp"
#include "topopt/solver.hpp"

namespace topopt {

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void scale(std::span<double> v, double a) {
  for (auto& x : v) x *= a;
}

}  // namespace

std::vector<double> seeded_start_vector(const LinearOperator& op, std::uint64_t seed) {
  const std::size_t n = op.size();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n >> 32)};
  std::mt19937_64 gen(seq);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = dist(gen);
  op.project(x);
  const double nx = norm2(x);
  if (nx == 0.0) throw std::runtime_error("seeded_start_vector: start vector is zero");
  scale(x, 1.0 / nx);
  return x;
}

EigenEstimate power_iteration(const LinearOperator& op, int max_steps, double rel_tol,
                              std::uint64_t seed) {
  if (max_steps < 1) throw std::invalid_argument("power_iteration: max_steps must be >= 1");
  auto x = seeded_start_vector(op, seed);
  std::vector<double> y(op.size());
  EigenEstimate est;
  est.capped = true;
  double prev = 0.0;
  for (int k = 1; k <= max_steps; ++k) {
    op.apply(std::span<const double>(x), std::span<double>(y));
    const double lambda = dot(x, y);
    est.value = lambda;
    est.steps = k;
    est.history.push_back(lambda);
    if (k > 1 && std::abs(lambda - prev) <= rel_tol * std::abs(lambda)) {
      est.capped = false;
      break;
    }
    prev = lambda;
    const double ny = norm2(y);
    if (ny == 0.0) {
      est.capped = false;
      break;
    }
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = y[i] / ny;
  }
  return est;
}

EigenEstimate inverse_iteration(const LinearOperator& op, double rel_tol, std::uint64_t seed,
                                double inner_tol, int inner_cap, int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("inverse_iteration: max_steps must be >= 1");
  auto x = seeded_start_vector(op, seed);
  const auto diag = op.diagonal();
  const CgConfig inner{inner_tol, inner_cap, false};
  EigenEstimate est;
  est.capped = true;
  double prev = 0.0;
  for (int k = 1; k <= max_steps; ++k) {
    auto sol = pcg(op, x, diag, inner);
    auto& y = sol.u;
    const double xy = dot(x, y);
    if (!(xy > 0.0)) {
      throw std::runtime_error("inverse_iteration: x^T K^-1 x is not positive at step " +
                               std::to_string(k));
    }
    const double lambda = 1.0 / xy;
    est.value = lambda;
    est.steps = k;
    est.history.push_back(lambda);
    if (k > 1 && std::abs(lambda - prev) <= rel_tol * std::abs(lambda)) {
      est.capped = false;
      break;
    }
    prev = lambda;
    scale(y, 1.0 / norm2(y));
    x = std::move(y);
  }
  return est;
}

KappaReport estimate_kappa(const LinearOperator& op, const KappaConfig& config) {
  const auto hi = power_iteration(op, config.power_steps, config.power_tol, config.power_seed);
  const auto lo = inverse_iteration(op, config.inverse_tol, config.inverse_seed, config.inner_tol,
                                    config.inner_cap, config.inverse_steps);
  KappaReport r;
  r.lambda_max = hi.value;
  r.lambda_min = lo.value;
  r.kappa = std::max(1.0, hi.value / lo.value);
  r.eps_kappa = unit_roundoff(Precision::bf16) * r.kappa;
  r.threshold_exceeded = r.kappa > kBf16KappaThreshold;
  r.power_steps = hi.steps;
  r.inverse_steps = lo.steps;
  r.capped = hi.capped;
  return r;
}

void DiagonalOperator::apply(std::span<const double> v, std::span<double> w) const {
  for (std::size_t i = 0; i < d_.size(); ++i) w[i] = d_[i] * v[i];
}

void ScaledOperator::apply(std::span<const double> v, std::span<double> w) const {
  base_.apply(v, w);
  scale(w, alpha_);
}

std::vector<double> ScaledOperator::diagonal() const {
  auto d = base_.diagonal();
  std::vector<double> mask(d.size(), 1.0);
  base_.project(mask);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (mask[i] != 0.0) d[i] *= alpha_;
  }
  return d;
}

void ShiftedOperator::apply(std::span<const double> v, std::span<double> w) const {
  base_.apply(v, w);
  std::vector<double> pv(v.begin(), v.end());
  base_.project(pv);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] += sigma_ * pv[i];
}

std::vector<double> ShiftedOperator::diagonal() const {
  auto d = base_.diagonal();
  std::vector<double> mask(d.size(), 1.0);
  base_.project(mask);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (mask[i] != 0.0) d[i] += sigma_;
  }
  return d;
}

}  // namespace topopt
