#include <benchmark/benchmark.h>

#include "mtvgp/mcmc.hpp"
#include "mtvgp/simulate.hpp"

namespace {

void BM_McmcIteration(benchmark::State& state) {
  auto scn = mtvgp::SimulationScenario::gaussian_poisson(state.range(0), 0.1, 1.0, 7);
  scn.holdout_fraction = 0.0;
  const auto sim = mtvgp::simulate_replicate(scn, 0);
  const auto prior = mtvgp::PriorSpec::defaults(3, 2, mtvgp::phi_upper_bound(sim.train.sites, 0.5), 0.5);
  mtvgp::McmcConfig cfg;
  cfg.iterations = 20;
  cfg.burn_in = 20;
  cfg.m = 10;
  cfg.store_w = false;
  for (auto _ : state) benchmark::DoNotOptimize(mtvgp::run_chain(sim.train, prior, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.iterations);
}
BENCHMARK(BM_McmcIteration)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
