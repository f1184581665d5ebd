#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "smolsens/forward.hpp"
#include "smolsens/kernels.hpp"
#include "smolsens/propagator.hpp"
#include "smolsens/sensitivity.hpp"
#include "smolsens/stochastic.hpp"

using namespace smolsens;

namespace {

ParametricKernel additive(std::size_t n) {
  return make_kernel({KernelFamily::additive, {{0.5, 1.5}}}, {1.0}, BoundFunction::affine(), n);
}

SolveOptions opts(double dt) {
  SolveOptions o;
  o.dt_checkpoint = dt;
  o.overflow_fraction_max = 1.0;
  return o;
}

}  // namespace

static void BM_CoagApply(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = tabulate(additive(n));
  GridMeasure mu(n);
  for (Mass k = 1; k <= static_cast<Mass>(n); ++k) mu[k] = std::exp(-0.1 * double(k));
  for (auto _ : state) benchmark::DoNotOptimize(coag_apply(g.value, mu, mu));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CoagApply)->RangeMultiplier(2)->Range(32, 512)->Complexity(benchmark::oNSquared);

static void BM_SolveForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = tabulate(additive(n));
  for (auto _ : state) benchmark::DoNotOptimize(solve_forward(GridMeasure::dirac(n, 1), g, 1.0, opts(0.1)));
}
BENCHMARK(BM_SolveForward)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_SolveCoupled(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto g = tabulate(additive(n));
  for (auto _ : state) benchmark::DoNotOptimize(solve_coupled(GridMeasure::dirac(n, 1), g, 1.0, opts(0.1)));
}
BENCHMARK(BM_SolveCoupled)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SolveBackward(benchmark::State& state) {
  const std::size_t n = 64;
  const auto g = tabulate(additive(n));
  const double dt = 1.0 / static_cast<double>(state.range(0));
  const auto traj = solve_forward(GridMeasure::dirac(n, 1), g, 1.0, opts(dt));
  const auto f = TestFunction::sample(n, [](Mass x) { return std::cos(0.37 * double(x)); });
  for (auto _ : state) benchmark::DoNotOptimize(solve_backward(f, traj, g, 1.0, 0.0));
}
BENCHMARK(BM_SolveBackward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_MarcusLushnikov(benchmark::State& state) {
  const std::size_t n = 64;
  const auto k = kernel_fn(make_kernel({KernelFamily::constant, {{0.5, 1.5}}}, {1.0}, BoundFunction::affine(), n));
  const std::vector<double> times{0.0, 1.0, 2.0};
  std::uint64_t replica = 0;
  for (auto _ : state) benchmark::DoNotOptimize(ml_run(GridMeasure::dirac(n, 1), state.range(0), k, times, 1, replica++));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MarcusLushnikov)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
