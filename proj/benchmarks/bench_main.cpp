// Microbenchmarks for the three hot paths: the kinetic Monte Carlo engine,
// the finite-torus operator algebra, and the bound quadratures.

#include <benchmark/benchmark.h>

#include <random>

#include "sepvar/duality.hpp"
#include "sepvar/exact.hpp"
#include "sepvar/lattice.hpp"
#include "sepvar/simulate.hpp"
#include "sepvar/spectral.hpp"

using namespace sep;

namespace {

JumpRates asym_chain() {
  return JumpRates::make(1, {{{1, 0}, 0.7}, {{-1, 0}, 0.3}});
}
JumpRates drifted_2d() {
  return JumpRates::make(2, {{{1, 0}, 1.0}, {{0, 1}, 0.5}, {{0, -1}, 0.5}});
}

void BM_kmc_batch_1d(benchmark::State& state) {
  SimConfig cfg;
  cfg.side = static_cast<int>(state.range(0));
  cfg.sample_times = {5.0};
  cfg.trials = 16;
  cfg.seed = 9;
  const JumpRates rates = asym_chain();
  const InitialMeasure init = InitialMeasure::bernoulli(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(run_batch(rates, init, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.trials);
}
BENCHMARK(BM_kmc_batch_1d)->Arg(64)->Arg(256)->Arg(1024);

void BM_kmc_batch_2d(benchmark::State& state) {
  SimConfig cfg;
  cfg.side = static_cast<int>(state.range(0));
  cfg.sample_times = {5.0};
  cfg.trials = 16;
  cfg.seed = 9;
  const JumpRates rates = drifted_2d();
  const InitialMeasure init = InitialMeasure::bernoulli(0.5);
  for (auto _ : state) benchmark::DoNotOptimize(run_batch(rates, init, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.trials);
}
BENCHMARK(BM_kmc_batch_2d)->Arg(16)->Arg(32);

void BM_generator_assembly(benchmark::State& state) {
  const StateSpace sp =
      enumerate_states(1, static_cast<int>(state.range(0)), 3);
  const JumpRates rates = asym_chain();
  for (auto _ : state)
    benchmark::DoNotOptimize(build_generators(sp, rates));
  state.SetItemsProcessed(state.iterations() * sp.size());
}
BENCHMARK(BM_generator_assembly)->Arg(6)->Arg(8);

void BM_resolvent_identity(benchmark::State& state) {
  const StateSpace sp = enumerate_states(1, 6, 3);
  const JumpRates rates = asym_chain();
  for (auto _ : state)
    benchmark::DoNotOptimize(resolvent_comparison(sp, rates, 0.5));
}
BENCHMARK(BM_resolvent_identity);

void BM_coefficient_raise(benchmark::State& state) {
  const JumpRates rates = asym_chain();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CoefficientFunction f(1, SetLattice::Punctured);
  const int radius = static_cast<int>(state.range(0));
  for (int x = -radius; x <= radius; ++x)
    for (int y = x + 1; y <= radius; ++y)
      if (x != 0 && y != 0) f.set({{x, 0}, {y, 0}}, u(rng));
  for (auto _ : state)
    benchmark::DoNotOptimize(apply_coefficient_operator(
        CoeffOperator::EnvAntiRaise, f, rates, 0.5));
  state.SetItemsProcessed(state.iterations() * f.values.size());
}
BENCHMARK(BM_coefficient_raise)->Arg(3)->Arg(6);

void BM_bound_integrals_1d(benchmark::State& state) {
  const JumpRates rates = asym_chain();
  const int res = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        eval_bound_integrals(rates, 0.5, {1, 0}, 1e-3, res, res / 64));
}
BENCHMARK(BM_bound_integrals_1d)->Arg(1 << 14)->Arg(1 << 16);

void BM_bound_integrals_2d(benchmark::State& state) {
  const JumpRates rates = drifted_2d();
  const int res = static_cast<int>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        eval_bound_integrals(rates, 0.5, {1, 0}, 1e-3, res, res / 4));
}
BENCHMARK(BM_bound_integrals_2d)->Arg(1 << 7)->Arg(1 << 8);

}  // namespace

BENCHMARK_MAIN();
