#include <benchmark/benchmark.h>

#include <cmath>

#include "sgd/attention.hpp"
#include "sgd/experiment.hpp"
#include "sgd/moments.hpp"
#include "sgd/propagation.hpp"
#include "sgd/sampler.hpp"
#include "sgd/toyworld.hpp"

namespace {

using namespace sgd;

Grid2D noise(int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_gaussian(rng, n, n);
}

AttentionMatrix random_rows(Rng& rng, int r) {
  AttentionMatrix m(r);
  for (std::size_t q = 0; q < m.cells(); ++q) {
    double total = 0.0;
    auto row = m.row(q);
    for (double& v : row) total += (v = rng.uniform());
    for (double& v : row) v /= total;
  }
  return m;
}

void BM_MomentSummary(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Grid2D blob = render_blob(n, {n / 2.0, n / 2.0}, 0.5, n / 6.0, n / 16.0);
  for (auto _ : state) benchmark::DoNotOptimize(moment_summary(blob));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_MomentSummary)->Arg(16)->Arg(32)->Arg(64);

void BM_CrossLossGradient(benchmark::State& state) {
  const ToyWorld world(WorldSpec{});
  GuidanceConfig cfg;
  cfg.validate();
  const ScribbleSet scribbles = oriented_scribbles(world, 10);
  TokenMaps maps;
  maps.emplace("blob", noise(32, 1));
  for (auto _ : state) benchmark::DoNotOptimize(grad_cross_loss(maps, scribbles, cfg));
}
BENCHMARK(BM_CrossLossGradient);

void BM_Aggregate(benchmark::State& state) {
  Rng rng(2);
  SelfAttentionStack stack;
  for (int r : {8, 16, 32}) stack.levels.push_back(random_rows(rng, r));
  const std::vector<double> weights{8.0 / 56, 16.0 / 56, 32.0 / 56};
  for (auto _ : state) benchmark::DoNotOptimize(aggregate_self_attention(stack, weights, 32));
}
BENCHMARK(BM_Aggregate)->Unit(benchmark::kMillisecond);

void BM_MergeNeighbors(benchmark::State& state) {
  Rng rng(3);
  SelfAttentionStack stack;
  stack.levels.push_back(random_rows(rng, 32));
  const AnchorGrid anchors = pool_anchors(aggregate_self_attention(stack, std::vector<double>{1.0}, 32), 2);
  const ToyWorld world(WorldSpec{});
  const ScribbleSet scribbles = oriented_scribbles(world, 20);
  const PropagationState start = initial_propagation_state(scribbles, 16, 16, 1, 50);
  for (auto _ : state) benchmark::DoNotOptimize(merge_neighbors(start, anchors, 10.0, 20));
}
BENCHMARK(BM_MergeNeighbors);

void BM_GuidedSample(benchmark::State& state) {
  const ToyWorld world(WorldSpec{});
  GuidanceConfig cfg;
  cfg.propagation = state.range(0) != 0;
  cfg.validate();
  const DiffusionSchedule schedule = make_schedule(1000, 1e-4, 0.02, 50);
  const ScribbleSet scribbles = oriented_scribbles(world, 4);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Rng rng(seed++);
    benchmark::DoNotOptimize(guided_sample(world, scribbles, cfg, schedule, rng));
  }
}
BENCHMARK(BM_GuidedSample)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
