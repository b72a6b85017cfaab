#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "topopt/bench.hpp"
#include "topopt/element.hpp"
#include "topopt/mesh.hpp"
#include "topopt/operator.hpp"
#include "topopt/solver.hpp"

namespace {

using namespace topopt;

struct Fixture {
  std::shared_ptr<const DofMap> dofs;
  UnitStiffness ke = compute_unit_ke();
  std::vector<double> rho;

  Fixture(std::size_t n_elem, IndexPattern pattern) {
    const auto mesh = synthetic_mesh(n_elem);
    dofs = std::make_shared<const DofMap>(synthetic_dof_map(mesh, pattern, 42));
    rho.assign(dofs->n_elem, 0.5);
  }

  [[nodiscard]] MatFreeOperator op(Precision p, Variant v) const {
    return MatFreeOperator(dofs, ke, rho, SimpParams{}, {}, {p, v, ScatterMode::serial, 1});
  }
};

template <typename T>
std::vector<T> random_vector(std::size_t n) {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(dist(gen));
  return v;
}

template <typename T>
void run(benchmark::State& state, Precision precision, Variant variant, IndexPattern pattern) {
  const Fixture fx(static_cast<std::size_t>(state.range(0)), pattern);
  const auto op = fx.op(precision, variant);
  const auto v = random_vector<T>(op.size());
  std::vector<T> w(op.size());
  for (auto _ : state) {
    if (variant == Variant::fused) {
      op.matvec_fused<T>(v, w);
    } else {
      op.matvec_three_stage<T>(v, w);
    }
    benchmark::DoNotOptimize(w.data());
    benchmark::ClobberMemory();
  }
  state.counters["n_elem"] = static_cast<double>(fx.dofs->n_elem);
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(fx.dofs->n_elem));
}

void BM_ThreeStageFp64(benchmark::State& s) {
  run<double>(s, Precision::fp64, Variant::three_stage, IndexPattern::structured);
}
void BM_FusedFp64(benchmark::State& s) {
  run<double>(s, Precision::fp64, Variant::fused, IndexPattern::structured);
}
void BM_ThreeStageFp32(benchmark::State& s) {
  run<float>(s, Precision::fp32, Variant::three_stage, IndexPattern::structured);
}
void BM_FusedFp32(benchmark::State& s) {
  run<float>(s, Precision::fp32, Variant::fused, IndexPattern::structured);
}
void BM_FusedBf16(benchmark::State& s) {
  run<float>(s, Precision::bf16, Variant::fused, IndexPattern::structured);
}
void BM_FusedFp32RandomIndices(benchmark::State& s) {
  run<float>(s, Precision::fp32, Variant::fused, IndexPattern::seeded_random);
}

void BM_PcgDeskCantilever(benchmark::State& state) {
  const auto preset = make_preset("cantilever", 0.2);
  auto dofs = std::make_shared<const DofMap>(build_dof_map(preset.mesh));
  const std::vector<double> rho(dofs->n_elem, 0.5);
  const auto precision = static_cast<Precision>(state.range(0));
  const MatFreeOperator op(std::move(dofs), compute_unit_ke(), rho, SimpParams{}, preset.bcs.fixed,
                           {precision, Variant::fused, ScatterMode::serial, 1});
  const auto diag = op.jacobi_diagonal();
  CgConfig cg;
  cg.record_history = false;
  int iterations = 0;
  for (auto _ : state) {
    const auto sol = pcg(op, preset.bcs.load, diag, cg);
    iterations = sol.report.iterations;
    benchmark::DoNotOptimize(sol.u.data());
  }
  state.counters["cg_iters"] = iterations;
}

}  // namespace

BENCHMARK(BM_ThreeStageFp64)->Arg(1000)->Arg(8000)->Arg(27000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FusedFp64)->Arg(1000)->Arg(8000)->Arg(27000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ThreeStageFp32)->Arg(1000)->Arg(8000)->Arg(27000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FusedFp32)->Arg(1000)->Arg(8000)->Arg(27000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FusedBf16)->Arg(1000)->Arg(8000)->Arg(27000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_FusedFp32RandomIndices)->Arg(8000)->Arg(27000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_PcgDeskCantilever)
    ->Arg(static_cast<int>(Precision::fp64))
    ->Arg(static_cast<int>(Precision::fp32))
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
