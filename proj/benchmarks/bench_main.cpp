#include <benchmark/benchmark.h>

#include <random>

#include "scripta/knn.hpp"
#include "scripta/mlp.hpp"
#include "scripta/srs_lbp.hpp"

using namespace scripta;

namespace {

GrayImage noise(int side) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(side) * side);
  for (auto& x : v) x = u(rng);
  return GrayImage(side, side, std::move(v));
}

// Side lengths step by sqrt(2) so the pixel count doubles; time should roughly double too.
void BM_ExtractFeatures(benchmark::State& state) {
  const auto img = noise(static_cast<int>(state.range(0)));
  const FeatureConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(img, cfg));
  state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_ExtractFeatures)->Arg(64)->Arg(91)->Arg(128)->Arg(181)->Arg(256)->Complexity(benchmark::oN)->Unit(benchmark::kMillisecond);

void BM_SingleRadius(benchmark::State& state) {
  const auto img = noise(128);
  const RingSpec ring{static_cast<int>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(srs_code_map(img, ring));
}
BENCHMARK(BM_SingleRadius)->DenseRange(1, 12, 11)->Unit(benchmark::kMillisecond);

void BM_MlpForward(benchmark::State& state) {
  const auto m = init_model(9216, 10, 1);
  std::vector<float> x(9216, 1.0f / 9216);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(std::span<const float>(x)));
}
BENCHMARK(BM_MlpForward)->Unit(benchmark::kMillisecond);

void BM_MlpTrainBatch(benchmark::State& state) {
  const auto m = init_model(9216, 10, 1);
  const Mlp::Matrix x = Mlp::Matrix::Constant(state.range(0), 9216, 1.0f / 9216);
  std::vector<std::uint32_t> targets(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) {
    const auto acts = m.forward_batch(x);
    benchmark::DoNotOptimize(m.backward_batch(x, targets, acts));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpTrainBatch)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_KnnClassify(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> g(0.0f, 1.0f);
  const std::size_t n = static_cast<std::size_t>(state.range(0)), dim = 1024;
  std::vector<float> flat(n * dim);
  for (auto& v : flat) v = g(rng);
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i % 10);
  std::vector<std::string> names;
  for (int c = 0; c < 10; ++c) names.push_back("c" + std::to_string(c));
  const KnnIndex idx(flat, dim, labels, names);
  std::vector<float> q(dim);
  for (auto& v : q) v = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(idx.classify(q, 1));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KnnClassify)->RangeMultiplier(2)->Range(1024, 8192)->Complexity(benchmark::oN);

}  // namespace
BENCHMARK_MAIN();
