// Serial reference vs OpenMP kernels. The second argument selects the path:
// 0 = serial, 1 = parallel.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "wsmots/crf_loss.hpp"
#include "wsmots/metrics.hpp"
#include "wsmots/permutohedral.hpp"
#include "wsmots/synth.hpp"
#include "wsmots/weak_labels.hpp"

namespace {

using namespace wsmots;

Execution exec_of(const benchmark::State& state) {
  return state.range(1) ? Execution::Parallel : Execution::Serial;
}

RgbImage noise_image(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> rgb(static_cast<std::size_t>(n) * n * 3);
  for (auto& v : rgb) v = u(rng);
  return RgbImage(n, n, std::move(rgb));
}

std::vector<double> noise_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

void BM_DenseAffinity(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto img = noise_image(n, 1);
  const auto v = noise_vector(img.pixels(), 2);
  const DenseAffinity op(img, AffinityParams{}, exec_of(state));
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(v));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.pixels()));
}
BENCHMARK(BM_DenseAffinity)->ArgsProduct({{32, 64}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_LatticeBuild(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto img = noise_image(n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(LatticeAffinity(img, AffinityParams{}, exec_of(state)));
}
BENCHMARK(BM_LatticeBuild)->ArgsProduct({{64, 128}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_LatticeFilter(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto img = noise_image(n, 4);
  const auto v = noise_vector(img.pixels(), 5);
  const LatticeAffinity op(img, AffinityParams{}, exec_of(state));
  for (auto _ : state) benchmark::DoNotOptimize(op.apply(v));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.pixels()));
}
BENCHMARK(BM_LatticeFilter)->ArgsProduct({{64, 128}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_BatchLocLoss(benchmark::State& state) {
  const auto rois = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::uniform_int_distribution<int> cell(0, 2);
  std::vector<LocItem> items(rois);
  for (auto& it : items) {
    it.label = PseudoLabel(28, 28);
    for (auto& c : it.label.values()) c = static_cast<LabelCell>(cell(rng));
    it.pred = ProbMask(28, 28);
    for (auto& p : it.pred.values()) p = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(batch_loc_loss(items, exec_of(state)));
}
BENCHMARK(BM_BatchLocLoss)->ArgsProduct({{64, 512}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_AccumulateSequence(benchmark::State& state) {
  SynthConfig cfg;
  cfg.frames = static_cast<int>(state.range(0));
  cfg.objects = 8;
  cfg.width = 512;
  cfg.height = 256;
  const auto seq = synthesize(cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(accumulate_sequence(seq.gt, seq.gt, 1, exec_of(state)));
  }
}
BENCHMARK(BM_AccumulateSequence)->ArgsProduct({{50, 200}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
