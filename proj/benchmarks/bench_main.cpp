#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dpofield/field.hpp"
#include "dpofield/flow.hpp"
#include "dpofield/loss.hpp"
#include "dpofield/policy.hpp"

using namespace dpofield;

namespace {

std::vector<RatioPoint> points(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  std::vector<RatioPoint> out(n);
  for (auto& p : out) p = {u(rng), u(rng)};
  return out;
}

void BM_Loss(benchmark::State& state) {
  const auto pts = points(1024);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(dpo_loss(pts[i++ & 1023], {0.1}));
}
BENCHMARK(BM_Loss);

void BM_Gradient(benchmark::State& state) {
  const auto pts = points(1024);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(dpo_gradient(pts[i++ & 1023], {0.1}));
}
BENCHMARK(BM_Gradient);

void BM_FiniteDiffGradient(benchmark::State& state) {
  const auto pts = points(1024);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(finite_diff_gradient(pts[i++ & 1023], {0.1}, 1e-6));
  }
}
BENCHMARK(BM_FiniteDiffGradient);

void BM_SampleField(benchmark::State& state) {
  const auto grid = GridSpec::square(0.01, 2.0, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sample_field(grid, {0.1}));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(grid.size()));
}
BENCHMARK(BM_SampleField)->Arg(50)->Arg(200);

void BM_FlowRk4(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(integrate_flow({0.5, 0.5}, {0.1}, {}));
}
BENCHMARK(BM_FlowRk4)->Unit(benchmark::kMillisecond);

void BM_Sweep(benchmark::State& state) {
  SweepConfig cfg;
  cfg.threads = static_cast<unsigned>(state.range(0));
  const auto grid = GridSpec::square(0.05, 1.9, 10);
  for (auto _ : state) benchmark::DoNotOptimize(sweep_initial_conditions(grid, {0.3}, cfg));
}
BENCHMARK(BM_Sweep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_PolicyGradientAutoregressive(benchmark::State& state) {
  const auto pol = TabularPolicy::autoregressive(4, 4, {"p"});
  const PreferenceTriple t{"p", {0, 1, 2, 3}, {0, 1, 3, 2}};
  for (auto _ : state) benchmark::DoNotOptimize(dpo_policy_gradient(pol, pol, t, {0.1}));
}
BENCHMARK(BM_PolicyGradientAutoregressive);

void BM_Train(benchmark::State& state) {
  const auto pol = TabularPolicy::atomic(4, {"p"});
  const std::vector<PreferenceTriple> data{{"p", {0}, {1}}};
  for (auto _ : state) benchmark::DoNotOptimize(train(pol, pol, data, {0.1, 200, {0.1}}));
}
BENCHMARK(BM_Train)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
