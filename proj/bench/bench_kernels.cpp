// Serial references against the OpenMP kernels. Thread count comes from
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "rbgrad/diagnostics.hpp"
#include "rbgrad/gmm.hpp"

using namespace rbgrad;

namespace {

const GmmModel& paper_sized_gmm() {
  static const GmmModel model = [] {
    GmmConfig cfg;
    Rng rng(1);
    const GmmDataset data = gmm_simulate(cfg, rng);
    return GmmModel(cfg, data.y, kmeans_init(data.y, cfg.components, rng));
  }();
  return model;
}

void BM_GmmGradient(benchmark::State& state) {
  const auto execution = static_cast<Execution>(state.range(0));
  const EstimatorConfig est{EstimatorKind::ReinforcePlus, static_cast<std::size_t>(state.range(1))};
  const GmmModel& m = paper_sized_gmm();
  const ParamVector x = m.initial_params();
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(m.loss_gradient(x, est, rng, execution));
}

void BM_GmmElbo(benchmark::State& state) {
  const GmmModel& m = paper_sized_gmm();
  const ParamVector x = m.initial_params();
  for (auto _ : state) benchmark::DoNotOptimize(m.elbo(x));
}

void BM_EmpiricalMoments(benchmark::State& state) {
  const auto execution = static_cast<Execution>(state.range(0));
  Rng r(3);
  const RandomInstance inst = random_instance(r, 10, 10);
  const EstimatorCall call = [&](Rng& g) {
    return rao_blackwellize(BaseEstimator::ReinforcePlus, inst.dist, inst.integrand, 2, g).grad;
  };
  for (auto _ : state) benchmark::DoNotOptimize(empirical_moments(call, 50'000, 1, execution));
}

}  // namespace

// range(0): 0 = serial, 1 = parallel
BENCHMARK(BM_GmmGradient)->ArgsProduct({{0, 1}, {0, 3}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GmmElbo)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_EmpiricalMoments)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
