#include <benchmark/benchmark.h>

#include "rhg/scenario.hpp"
#include "rhg/solver.hpp"

using namespace rhg;

static void BM_Condense(benchmark::State& state) {
  Scenario sc = load_builtin("illustrative_stable");
  for (auto _ : state) {
    CondensedGame g = condense(sc.spec);
    benchmark::DoNotOptimize(g.mu);
  }
}
BENCHMARK(BM_Condense);

static void BM_SymEigen(benchmark::State& state) {
  const std::size_t n = state.range(0);
  SplitMix64 rng(1);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) s(i, j) = s(j, i) = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    auto e = sym_eigen(s);
    benchmark::DoNotOptimize(e.eigenvalues.back());
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_SymEigen)->RangeMultiplier(2)->Range(8, 64)->Complexity();

static void BM_BatteryStep(benchmark::State& state) {
  Scenario sc = load_builtin("battery_charging");
  CondensedGame g = condense(sc.schedule->game_at(5));
  Vector x{4.0, 4.0, 4.0};
  for (auto _ : state) {
    auto sol = solve_vgne(g, x);
    benchmark::DoNotOptimize(sol.residual);
  }
}
BENCHMARK(BM_BatteryStep);

static void BM_LocalCertificate(benchmark::State& state) {
  Scenario sc = load_builtin("battery_charging");
  CondensedGame g = condense(sc.spec);
  for (auto _ : state) {
    auto r = search_certificate(local_lmi_data(g, 0));
    benchmark::DoNotOptimize(r.feasible);
  }
}
BENCHMARK(BM_LocalCertificate);

BENCHMARK_MAIN();
