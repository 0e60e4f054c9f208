#include "medsel/pipeline.hpp"
#include "medsel/simulation.hpp"

#include <benchmark/benchmark.h>

using namespace medsel;

namespace {

struct Prepared {
  Dataset d;
  MediatorFit med;
  FactorFit fac;
  ProxyResult proxy;
};

Prepared prepare(Index n, Index p) {
  SimConfig cfg;
  cfg.n = n;
  cfg.p = p;
  Prepared out;
  out.d = generate(cfg, 0).first;
  out.med = fit_mediator_model(out.d, BasisSpec::simulation_default());
  out.fac = fit_factor(out.med.residuals, 1);
  out.proxy = construct_proxy(out.d, out.med, out.fac);
  return out;
}

void BM_PartialLasso(benchmark::State& state) {
  const Prepared pr = prepare(state.range(0), state.range(1));
  PenaltySpec spec;
  spec.lambda = 0.05 * lambda_max(pr.d, pr.proxy.proxy, spec);
  for (auto _ : state) benchmark::DoNotOptimize(fit_partial_lasso(pr.d, pr.proxy.proxy, spec).objective);
}
BENCHMARK(BM_PartialLasso)->Args({1000, 100})->Args({1000, 400})->Unit(benchmark::kMillisecond);

void BM_TwoStageCv(benchmark::State& state) {
  const Prepared pr = prepare(state.range(0), state.range(1));
  TwoStageOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(fit_two_stage(pr.d, pr.proxy.proxy, opts).adaptive.objective);
}
BENCHMARK(BM_TwoStageCv)->Args({1000, 100})->Unit(benchmark::kMillisecond);

void BM_FactorEm(benchmark::State& state) {
  const Prepared pr = prepare(1000, state.range(0));
  const Index t = state.range(1);
  for (auto _ : state) benchmark::DoNotOptimize(fit_factor(pr.med.residuals, t).loglik);
}
BENCHMARK(BM_FactorEm)->Args({100, 1})->Args({100, 3})->Args({400, 1})->Unit(benchmark::kMillisecond);

void BM_Sandwich(benchmark::State& state) {
  const Prepared pr = prepare(1000, state.range(0));
  TwoStageOptions opts;
  const OutcomeFit fit = fit_two_stage(pr.d, pr.proxy.proxy, opts).adaptive;
  for (auto _ : state)
    benchmark::DoNotOptimize(estimate_sandwich(pr.d, pr.med, pr.fac, pr.proxy.proxy, fit).se(0));
}
BENCHMARK(BM_Sandwich)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Pipeline(benchmark::State& state) {
  SimConfig cfg;
  const Dataset d = generate(cfg, 0).first;
  PipelineOptions po;
  po.basis = BasisSpec::simulation_default();
  po.t = 1;
  for (auto _ : state) benchmark::DoNotOptimize(analyze(d, po).selection.nde.estimate);
}
BENCHMARK(BM_Pipeline)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
