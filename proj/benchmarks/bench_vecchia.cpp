#include <benchmark/benchmark.h>

#include "mtvgp/geometry.hpp"
#include "mtvgp/kernels.hpp"
#include "mtvgp/random.hpp"
#include "mtvgp/vecchia.hpp"

namespace {

mtvgp::SiteSet uniform_sites(mtvgp::Index n, std::uint64_t seed) {
  mtvgp::Rng rng(seed);
  Eigen::MatrixXd c(n, 2);
  for (mtvgp::Index i = 0; i < n; ++i) c.row(i) << rng.uniform(), rng.uniform();
  return mtvgp::SiteSet(c);
}

void BM_MaxminOrder(benchmark::State& state) {
  const auto sites = uniform_sites(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(mtvgp::maxmin_order(sites));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MaxminOrder)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_BuildFactor(benchmark::State& state) {
  const auto sites = uniform_sites(state.range(0), 2);
  const auto order = mtvgp::maxmin_order(sites);
  const mtvgp::VecchiaStructure structure(sites, order,
                                          mtvgp::build_conditioning_sets(sites, order, state.range(1)));
  for (auto _ : state)
    benchmark::DoNotOptimize(mtvgp::build_factor(structure, mtvgp::MaternParams{0.2, 0.5}));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildFactor)
    ->Args({1000, 10})
    ->Args({2000, 10})
    ->Args({4000, 10})
    ->Args({2000, 20})
    ->Unit(benchmark::kMillisecond);

void BM_BuildFactorBesselPath(benchmark::State& state) {
  const auto sites = uniform_sites(2000, 3);
  const auto order = mtvgp::maxmin_order(sites);
  const mtvgp::VecchiaStructure structure(sites, order, mtvgp::build_conditioning_sets(sites, order, 10));
  for (auto _ : state)
    benchmark::DoNotOptimize(mtvgp::build_factor(structure, mtvgp::MaternParams{0.2, 0.3}));
}
BENCHMARK(BM_BuildFactorBesselPath)->Unit(benchmark::kMillisecond);

void BM_BesselK(benchmark::State& state) {
  double x = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mtvgp::bessel_k(0.3, x));
    x = x > 40.0 ? 0.01 : x * 1.1;
  }
}
BENCHMARK(BM_BesselK);

}  // namespace
