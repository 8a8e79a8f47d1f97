#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "neckface/detectors.hpp"
#include "neckface/imaging.hpp"
#include "neckface/metrics.hpp"
#include "neckface/minirocket.hpp"
#include "neckface/reaction_dataset.hpp"
#include "neckface/synthetic_world.hpp"

using namespace neckface;

namespace {

std::vector<int> coin_labels(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(rng() % 2);
  return v;
}

void BM_MarginMetrics(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto t = coin_labels(n, 1), p = coin_labels(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(margin_metrics(p, t, 3));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_MarginMetrics)->Arg(1000)->Arg(100000);

void BM_MakeWindows(benchmark::State& state) {
  ReactionSequence s;
  const Eigen::Index t = 3600;
  s.features = Eigen::MatrixXd::Random(t, 55);
  s.labels = coin_labels(static_cast<std::size_t>(t), 3);
  s.timestamps.resize(static_cast<std::size_t>(t));
  for (auto _ : state) benchmark::DoNotOptimize(make_windows(s, 80, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_MakeWindows)->Arg(3)->Arg(5);

void BM_RenderAndPreprocess(benchmark::State& state) {
  const auto profile = make_profile("P01", 1);
  const auto session = gen_calibration_session(profile, 10.0, 12, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(preprocess_pair(session.frame_pair(i % session.size())));
    ++i;
  }
}
BENCHMARK(BM_RenderAndPreprocess)->Unit(benchmark::kMillisecond);

void BM_MiniRocketTransform(benchmark::State& state) {
  const int n = 64, channels = 55, length = 80;
  std::mt19937_64 rng(4);
  std::normal_distribution<float> g;
  std::vector<float> x(static_cast<std::size_t>(n * channels * length));
  for (auto& v : x) v = g(rng);
  MiniRocketOptions o;
  o.num_features = static_cast<int>(state.range(0));
  const auto params = minirocket_fit(x, n, channels, length, o);
  for (auto _ : state) benchmark::DoNotOptimize(minirocket_transform(params, x, n));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MiniRocketTransform)->Arg(840)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_DetectorForward(benchmark::State& state) {
  DetectorSpec spec;
  spec.arch = static_cast<Arch>(state.range(0));
  const auto d = build_detector(spec);
  const auto x = torch::randn({128, spec.features, spec.interval_len});
  for (auto _ : state) benchmark::DoNotOptimize(d->probabilities(x));
  state.SetLabel(to_string(spec.arch));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_DetectorForward)
    ->Arg(static_cast<int>(Arch::kGruFcn))
    ->Arg(static_cast<int>(Arch::kInceptionTime))
    ->Arg(static_cast<int>(Arch::kMlDnn))
    ->Arg(static_cast<int>(Arch::kTransformer))
    ->Unit(benchmark::kMillisecond);

}  // namespace

// The distro benchmark_main archive holds LTO bytecode from another GCC; define main here.
BENCHMARK_MAIN();
