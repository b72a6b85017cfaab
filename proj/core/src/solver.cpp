#include "topopt/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace topopt {

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::converged:
      return "converged";
    case Termination::zero_rhs:
      return "zero_rhs";
    case Termination::max_iter:
      return "max_iter";
    case Termination::breakdown:
      return "breakdown";
    case Termination::stagnation:
      return "stagnation";
    case Termination::max_outer:
      return "max_outer";
  }
  return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Blocked pairwise reduction in the working precision, the way a device-side
// tree reduction accumulates.
template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  constexpr std::size_t block = 64;
  const std::size_t n = a.size();
  std::vector<T> partial((n + block - 1) / block, T{0});
  for (std::size_t i = 0; i < n; ++i) partial[i / block] += a[i] * b[i];
  while (partial.size() > 1) {
    std::vector<T> next((partial.size() + 1) / 2, T{0});
    for (std::size_t i = 0; i < partial.size(); ++i) next[i / 2] += partial[i];
    partial.swap(next);
  }
  return partial.empty() ? T{0} : partial[0];
}

template <typename T>
double norm2(std::span<const T> a) {
  return std::sqrt(static_cast<double>(dot(a, a)));
}

double norm2_double(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

template <typename T>
void true_residual(const LinearOperator& op, std::span<const T> f, std::span<const T> x,
                   std::span<T> scratch, std::span<T> r) {
  op.apply(x, scratch);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f[i] - scratch[i];
}

// ||f - K x|| / ||f|| with the exact operator in double; optionally stores
// the residual.
template <typename T>
double reference_residual(const LinearOperator& op, std::span<const double> f, std::span<const T> x,
                          double fnorm, std::span<T> r_out = {}) {
  std::vector<double> xd(x.begin(), x.end());
  std::vector<double> kx(xd.size());
  op.apply_reference(xd, kx);
  double ss = 0.0;
  for (std::size_t i = 0; i < kx.size(); ++i) {
    const double d = f[i] - kx[i];
    ss += d * d;
    if (!r_out.empty()) r_out[i] = static_cast<T>(d);
  }
  return std::sqrt(ss) / fnorm;
}

template <typename T>
SolveResult pcg_impl(const LinearOperator& op, std::span<const double> f,
                     std::span<const double> diag, const CgConfig& cfg,
                     std::span<const double> x0) {
  const auto start = Clock::now();
  const std::size_t n = op.size();
  if (f.size() != n || diag.size() != n || (!x0.empty() && x0.size() != n)) {
    throw std::invalid_argument("pcg: vector lengths do not match operator size " +
                                std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(diag[i] > 0.0)) {
      throw OperatorInvalid("pcg: non-positive Jacobi diagonal " + std::to_string(diag[i]) +
                            " at DOF " + std::to_string(i));
    }
  }

  SolveResult result;
  auto& rep = result.report;
  rep.precision = op.precision();
  result.u.assign(n, 0.0);

  const double fnorm = norm2_double(f);
  if (fnorm == 0.0) {
    rep.converged = true;
    rep.termination = Termination::zero_rhs;
    if (cfg.record_history) rep.residual_history.push_back(0.0);
    rep.wall_time = seconds_since(start);
    return result;
  }

  const bool round_vectors = cfg.bf16_vectors && op.precision() == Precision::bf16;
  auto quantize = [&](std::vector<T>& v) {
    if constexpr (std::is_same_v<T, float>) {
      if (round_vectors)
        for (auto& x : v) x = round_to_bf16(x);
    }
  };

  std::vector<T> fv(f.begin(), f.end());
  std::vector<T> inv_d(n);
  for (std::size_t i = 0; i < n; ++i) inv_d[i] = static_cast<T>(1.0 / diag[i]);
  std::vector<T> x(n, T{0}), r(n), z(n), p(n), q(n);

  auto refresh = [&] {
    if (cfg.replace_in_fp64) {
      reference_residual<T>(op, f, x, fnorm, r);
    } else {
      true_residual<T>(op, fv, x, q, r);
    }
  };
  if (!x0.empty()) {
    std::copy(x0.begin(), x0.end(), x.begin());
    refresh();
  } else {
    r = fv;
  }
  auto rel = [&] { return norm2<T>(r) / fnorm; };
  const double verify_tol =
      cfg.rel_tol * (op.precision() == Precision::fp64 ? 1.0 : cfg.reduced_precision_slack);

  // Once a recursive residual below tolerance fails the FP64 check, the
  // working precision has hit its attainable accuracy. From then on every
  // true-residual checkpoint is verified, the best iterate is kept, and the
  // solve stops after max_failed_verifications checkpoints without progress.
  const bool replace_residual = op.precision() == Precision::fp64 || cfg.replace_in_fp64;
  bool at_floor = false;
  int stalled = 0;
  double verified = -1.0;
  double best_verified = std::numeric_limits<double>::infinity();
  std::vector<T> best_x;
  auto checkpoint = [&]() -> bool {
    verified = reference_residual<T>(op, f, x, fnorm);
    if (verified < best_verified) {
      best_verified = verified;
      best_x = x;
      stalled = 0;
    } else {
      ++stalled;
    }
    return cfg.max_failed_verifications > 0 && stalled >= cfg.max_failed_verifications;
  };

  double res = rel();
  if (cfg.record_history) rep.residual_history.push_back(res);
  bool fresh = true;  // r currently equals the true residual
  if (res <= cfg.rel_tol && (verified = reference_residual<T>(op, f, x, fnorm)) <= verify_tol) {
    rep.converged = true;
  } else {
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_d[i] * r[i];
    p = z;
    quantize(p);
    T rz = dot<T>(r, z);
    bool restart = false;
    for (int k = 1; k <= cfg.max_iter; ++k) {
      op.apply(std::span<const T>(p), std::span<T>(q));
      const T pq = dot<T>(p, q);
      if (!std::isfinite(static_cast<double>(pq))) {
        throw SolverDivergence(
            "pcg: non-finite curvature p^T K p at iteration " + std::to_string(k), k);
      }
      if (!(pq > T{0})) {
        rep.termination = Termination::breakdown;
        break;
      }
      const T alpha = rz / pq;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      quantize(r);
      rep.iterations = k;
      fresh = false;
      if (cfg.true_residual_interval > 0 && k % cfg.true_residual_interval == 0) {
        if (replace_residual) {
          refresh();
          fresh = true;
        } else {
          // replacing a reduced-precision residual without a restart breaks
          // conjugacy, so these checkpoints only monitor the FP64 residual
          const bool give_up = checkpoint();
          if (verified <= verify_tol) {
            rep.converged = true;
            break;
          }
          if (at_floor && give_up) {
            rep.termination = Termination::stagnation;
            break;
          }
        }
      }
      res = rel();
      if (!std::isfinite(res)) {
        throw SolverDivergence("pcg: non-finite residual at iteration " + std::to_string(k), k);
      }
      if (cfg.record_history) rep.residual_history.push_back(res);
      if (res <= cfg.rel_tol) {
        const bool give_up = checkpoint();
        if (verified <= verify_tol) {
          rep.converged = true;
          break;
        }
        ++rep.failed_verifications;
        at_floor = true;
        if (give_up) {
          rep.termination = Termination::stagnation;
          break;
        }
        refresh();
        fresh = true;
        res = rel();
        restart = true;
      }
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_d[i] * r[i];
      const T rz_next = dot<T>(r, z);
      const T beta = restart ? T{0} : rz_next / rz;
      restart = false;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
      quantize(p);
    }
  }

  if (!rep.converged) {
    const double current = reference_residual<T>(op, f, x, fnorm);
    if (!best_x.empty() && best_verified < current) {
      x = best_x;
      verified = best_verified;
      fresh = false;
    } else {
      verified = current;
    }
  }
  if (!fresh) {
    refresh();
    res = rel();
  }
  rep.final_rel_residual = res;
  rep.verified_rel_residual = verified;
  if (rep.converged) {
    rep.termination = Termination::converged;
  } else if (rep.termination != Termination::breakdown &&
             rep.termination != Termination::stagnation) {
    rep.termination = Termination::max_iter;
  }
  std::copy(x.begin(), x.end(), result.u.begin());
  rep.compliance = compliance(result.u, f);
  rep.wall_time = seconds_since(start);
  return result;
}

}  // namespace

SolveResult pcg(const LinearOperator& op, std::span<const double> f, std::span<const double> diag,
                const CgConfig& config, std::span<const double> x0) {
  if (config.max_iter < 1 || !(config.rel_tol > 0.0)) {
    throw std::invalid_argument("pcg: need rel_tol > 0 and max_iter >= 1");
  }
  if (op.precision() == Precision::fp64) return pcg_impl<double>(op, f, diag, config, x0);
  return pcg_impl<float>(op, f, diag, config, x0);
}

double compliance(std::span<const double> u, std::span<const double> f) {
  if (u.size() != f.size()) throw std::invalid_argument("compliance: length mismatch");
  return std::inner_product(u.begin(), u.end(), f.begin(), 0.0);
}

double relative_residual(const LinearOperator& op, std::span<const double> u,
                         std::span<const double> f) {
  std::vector<double> ku(op.size());
  op.apply(u, std::span<double>(ku));
  double rr = 0.0;
  for (std::size_t i = 0; i < ku.size(); ++i) {
    const double d = f[i] - ku[i];
    rr += d * d;
  }
  const double fnorm = norm2_double(f);
  return fnorm == 0.0 ? std::sqrt(rr) : std::sqrt(rr) / fnorm;
}

SolveResult solve_bf16_plain(const LinearOperator& op_bf16, std::span<const double> f,
                             const CgConfig& config) {
  const auto diag = op_bf16.diagonal();
  return pcg(op_bf16, f, diag, config);
}

SolveResult iterative_refinement(const LinearOperator& op_fp32, const LinearOperator& op_bf16,
                                 std::span<const double> f, const IrConfig& config) {
  const auto start = Clock::now();
  const std::size_t n = op_fp32.size();
  if (op_bf16.size() != n || f.size() != n) {
    throw std::invalid_argument("iterative_refinement: operator sizes do not match");
  }
  SolveResult result;
  auto& rep = result.report;
  rep.precision = Precision::bf16;
  result.u.assign(n, 0.0);

  const double fnorm = norm2_double(f);
  if (fnorm == 0.0) {
    rep.converged = true;
    rep.termination = Termination::zero_rhs;
    rep.residual_history.push_back(0.0);
    rep.wall_time = seconds_since(start);
    return result;
  }

  const auto diag = op_bf16.diagonal();
  CgConfig inner{config.inner_tol, config.inner_max_iter, false};

  std::vector<float> fv(f.begin(), f.end());
  std::vector<float> u(n, 0.0f), r(n), ku(n);
  std::vector<double> rd(n);
  rep.termination = Termination::max_outer;
  for (int outer = 0;; ++outer) {
    op_fp32.apply(std::span<const float>(u), std::span<float>(ku));
    for (std::size_t i = 0; i < n; ++i) r[i] = fv[i] - ku[i];
    const double res = norm2<float>(r) / fnorm;
    rep.residual_history.push_back(res);
    rep.outer_trace.push_back({outer, res, 0});
    rep.final_rel_residual = res;
    if (!std::isfinite(res)) {
      throw SolverDivergence("iterative_refinement: non-finite outer residual", outer);
    }
    if (res <= config.rel_tol) {
      rep.converged = true;
      rep.termination = Termination::converged;
      break;
    }
    const auto& tr = rep.outer_trace;
    if (tr.size() >= 3) {
      const double keep = 1.0 - config.stagnation_reduction;
      const auto m = tr.size();
      if (tr[m - 1].rel_residual > keep * tr[m - 2].rel_residual &&
          tr[m - 2].rel_residual > keep * tr[m - 3].rel_residual) {
        rep.termination = Termination::stagnation;
        break;
      }
    }
    if (outer >= config.max_outer) break;

    std::copy(r.begin(), r.end(), rd.begin());
    const auto corr = pcg(op_bf16, rd, diag, inner);
    for (std::size_t i = 0; i < n; ++i) u[i] += static_cast<float>(corr.u[i]);
    rep.iterations += corr.report.iterations;
    rep.outer_trace.back().inner_iterations = corr.report.iterations;
    rep.outer_iterations = outer + 1;
  }
  std::copy(u.begin(), u.end(), result.u.begin());
  rep.compliance = compliance(result.u, f);
  rep.wall_time = seconds_since(start);
  return result;
}

}  // namespace topopt
