#include <benchmark/benchmark.h>

#include <cmath>

#include "metapop/canonical.hpp"
#include "metapop/exprlang.hpp"
#include "metapop/microsim.hpp"
#include "metapop/replicator.hpp"
#include "metapop/tss.hpp"

using namespace metapop;

namespace {

RateModel bench_model(double lambda = 1.0, double theta = 0.0) {
  return RateModel(
      1, [](double, TraitView x, TraitView y) { return std::exp(0.5 * (y[0] - x[0])); },
      [theta](double, TraitView) { return theta; }, [lambda](double, TraitView, double, TraitView) { return lambda; },
      MutationFamily::gaussian(1.0, 0.05), 3.0, true);
}

void BM_FixationProbability(benchmark::State& state) {
  const auto m = bench_model();
  const int N = static_cast<int>(state.range(0));
  double x = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fixation_probability(m, 0.5, Trait{x + 0.1}, Trait{x}, N));
    x += 1e-9;
  }
}
BENCHMARK(BM_FixationProbability)->Arg(5)->Arg(100);

void BM_ExprEvaluate(benchmark::State& state) {
  const auto c = expr::selection_kernel(expr::parse("exp((y-x)*(4*r-3)) + 0.5*sin(2*pi*(x-y))^2"));
  const Trait x{0.2}, y{0.7};
  for (auto _ : state) benchmark::DoNotOptimize(c(0.5, x, y));
}
BENCHMARK(BM_ExprEvaluate);

void BM_MicroAdvance(benchmark::State& state) {
  const auto m = bench_model();
  const auto K = static_cast<std::size_t>(state.range(0));
  std::vector<Trait> sites;
  for (std::size_t l = 0; l < K; ++l) sites.push_back(Trait{static_cast<double>(l % 2)});
  Rng rng(1);
  for (auto _ : state) {
    const auto res = micro_run(m, MicroState::monomorphic(sites, 5, 0.01), 100.0, rng, false);
    benchmark::DoNotOptimize(res.counters.candidates);
  }
}
BENCHMARK(BM_MicroAdvance)->Arg(2)->Arg(16);

void BM_TssAdvance(benchmark::State& state) {
  const auto m = bench_model(1.0, 1.0);
  const auto K = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  for (auto _ : state) {
    TssSimulator sim(m, 5, SiteConfiguration::from_traits(std::vector<Trait>(K, Trait{0.0})), rng);
    sim.advance_to(10.0);
    benchmark::DoNotOptimize(sim.counters().proposals);
  }
}
BENCHMARK(BM_TssAdvance)->Arg(8)->Arg(256);

void BM_ReplicatorIntegrate(benchmark::State& state) {
  const auto A = build_interaction_matrix([](TraitView x, TraitView y) { return x[0] * (1.0 + y[0]) / 25.0; },
                                          {Trait{0.2}, Trait{0.5}, Trait{0.9}}, 5);
  for (auto _ : state) {
    const auto tr = replicator_integrate(A, Eigen::Vector3d::Constant(1.0 / 3.0), 1e-3, 10.0, 1000);
    benchmark::DoNotOptimize(tr.weights.back());
  }
}
BENCHMARK(BM_ReplicatorIntegrate);

void BM_CanonicalStep(benchmark::State& state) {
  const auto m = bench_model(0.5, 1.0);
  XiEnsemble e;
  e.d = 1;
  e.r.assign(static_cast<std::size_t>(state.range(0)), 0.5);
  e.traits.assign(e.r.size(), 0.0);
  Rng rng(3);
  for (auto _ : state) {
    const auto tr = canonical_ensemble_run(m, 2, e, 1e-3, 1e-2, rng);
    benchmark::DoNotOptimize(tr.accepted_jumps);
  }
}
BENCHMARK(BM_CanonicalStep)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
