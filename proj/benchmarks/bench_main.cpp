#include <random>

#include <benchmark/benchmark.h>

#include "simmc/clustering.hpp"
#include "simmc/encoder.hpp"
#include "simmc/evaluator.hpp"
#include "simmc/masking.hpp"

namespace {

using namespace simmc;

Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = g(rng);
  return m;
}

// KS20 shapes: K = 75, f = 6, H = 256.
void BM_EncodeSequence(benchmark::State& state) {
  Rng rng(1);
  const ModelParams p = ModelParams::initialize(256, 75, false, rng);
  const Matrix frames = gaussian(6, 75, rng);
  const MaskVector mask = sample_masks(6, 2, 1, rng)[0];
  for (auto _ : state) {
    const auto inst = pool_instance(encode_frames(p, frames), mask);
    benchmark::DoNotOptimize(project(p, inst.v));
  }
}
BENCHMARK(BM_EncodeSequence);

void BM_TapeForwardBackward(benchmark::State& state) {
  Rng rng(2);
  const ModelParams p = ModelParams::initialize(256, 75, false, rng);
  const auto batch = static_cast<int>(state.range(0));
  std::vector<Matrix> frames;
  std::vector<std::vector<MaskVector>> masks;
  for (int b = 0; b < batch; ++b) {
    frames.push_back(gaussian(6, 75, rng));
    masks.push_back(sample_masks(6, 2, 2, rng));
  }
  const Vector up = gaussian(256, 1, rng);
  for (auto _ : state) {
    GradientTape tape(p);
    for (int b = 0; b < batch; ++b) {
      tape.record(frames[b], masks[b]);
      tape.add_upstream(b, 0, up, up);
      tape.add_upstream(b, 1, up, up);
    }
    benchmark::DoNotOptimize(tape.backward());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_TapeForwardBackward)->Arg(32)->Arg(256);

void BM_Dbscan(benchmark::State& state) {
  Rng rng(3);
  const auto n = state.range(0);
  const Matrix pts = l2_normalize_rows(gaussian(n, 64, rng));
  const double eps = knn_distance_percentile(pts, 4, 30.0);
  for (auto _ : state) benchmark::DoNotOptimize(dbscan(pts, eps, 4));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Dbscan)->RangeMultiplier(2)->Range(128, 1024)->Complexity(benchmark::oNSquared);

void BM_KnnPercentile(benchmark::State& state) {
  Rng rng(4);
  const Matrix pts = gaussian(state.range(0), 64, rng);
  for (auto _ : state) benchmark::DoNotOptimize(knn_distance_percentile(pts, 4, 30.0));
}
BENCHMARK(BM_KnnPercentile)->Arg(256)->Arg(1024);

void BM_RankGallery(benchmark::State& state) {
  Rng rng(5);
  const auto n = static_cast<int>(state.range(0));
  const Matrix probe = gaussian(n, 256, rng);
  const Matrix gallery = gaussian(n, 256, rng);
  std::vector<int> pids(n), gids(n);
  for (int i = 0; i < n; ++i) pids[i] = gids[i] = i % 20;
  for (auto _ : state) {
    const auto r = rank_gallery(probe, gallery, pids, gids);
    benchmark::DoNotOptimize(compute_metrics(r));
  }
}
BENCHMARK(BM_RankGallery)->Arg(100)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
