#include <benchmark/benchmark.h>

#include "driftguard/drift_geometry.hpp"
#include "driftguard/mlp.hpp"
#include "driftguard/objectives.hpp"
#include "driftguard/rng.hpp"

using namespace driftguard;

namespace {

Matrix random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, d);
  for (double& v : x.data()) v = rng.normal();
  return x;
}

MlpModel random_model(std::size_t d, std::size_t width) {
  Rng rng(7);
  return MlpModel::glorot({d, width, width, 1}, rng);
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  const MlpModel model = random_model(8, width);
  const Matrix x = random_batch(64, 8, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(model, x));
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64);

static void BM_Jvp(benchmark::State& state) {
  const MlpModel model = random_model(8, 64);
  const Matrix x = random_batch(64, 8, 2);
  Vector v(8, 0.0);
  v[1] = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(jvp(model, x, v));
}
BENCHMARK(BM_Jvp);

static void BM_PenaltyGradient(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  const MlpModel model = random_model(8, 64);
  const Matrix x = random_batch(64, 8, 3);
  Matrix basis(8, k, 0.0);
  for (std::size_t j = 0; j < k; ++j) basis(j, j) = 1.0;
  DriftSubspace v;
  v.basis = basis;
  for (auto _ : state) benchmark::DoNotOptimize(penalty_param_gradient(model, x, v));
}
BENCHMARK(BM_PenaltyGradient)->Arg(1)->Arg(2)->Arg(8);

static void BM_TrainingStep(benchmark::State& state) {
  const MlpModel model = random_model(2, 32);
  const Matrix x = random_batch(64, 2, 4);
  Vector y(64);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i % 2);
  const DriftSubspace v = DriftSubspace::axis(2, 1);
  for (auto _ : state) benchmark::DoNotOptimize(dtr_objective(model, x, y, v, 0.03));
}
BENCHMARK(BM_TrainingStep);

static void BM_PowerIteration(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const Matrix diffs = random_batch(40, d, 5);
  for (auto _ : state) benchmark::DoNotOptimize(diff_cloud_pca(diffs, 2));
}
BENCHMARK(BM_PowerIteration)->Arg(5)->Arg(8);

BENCHMARK_MAIN();
