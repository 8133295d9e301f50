// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "fsd/attacks.hpp"
#include "fsd/dither.hpp"
#include "fsd/filters.hpp"
#include "fsd/rng.hpp"
#include "fsd/tiny_model.hpp"

namespace {

fsd::Image noise_image(int side, std::uint64_t seed) {
  fsd::Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(side) * side * 3);
  for (double& x : v) x = rng.uniform();
  return fsd::Image(side, side, 3, std::move(v));
}

void BM_FsDither(benchmark::State& state) {
  const auto img = noise_image(static_cast<int>(state.range(0)), 1);
  const fsd::QuantSpec q(3);
  for (auto _ : state) benchmark::DoNotOptimize(fsd::fs_dither(img, q));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.size()));
}
BENCHMARK(BM_FsDither)->Arg(32)->Arg(224);

void BM_Blur(benchmark::State& state) {
  const auto img = noise_image(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(fsd::gaussian_blur(img, fsd::BlurSpec{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.size()));
}
BENCHMARK(BM_Blur)->Arg(32)->Arg(224);

void BM_InputGradient(benchmark::State& state) {
  const auto m = fsd::TinyModel::random({32, 32, 3}, 128, 4, 3);
  const auto img = noise_image(32, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fsd::loss_and_input_gradient(m, img, fsd::loss::CrossEntropy{1}));
  }
}
BENCHMARK(BM_InputGradient);

void BM_BatchedInputGradients(benchmark::State& state) {
  const auto m = fsd::TinyModel::random({32, 32, 3}, 128, 4, 3);
  std::vector<std::vector<double>> batch;
  for (int i = 0; i < state.range(0); ++i) {
    const auto img = noise_image(32, 10 + i);
    batch.emplace_back(img.data().begin(), img.data().end());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(fsd::loss_and_input_gradients(m, batch, fsd::loss::CrossEntropy{1}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BatchedInputGradients)->Arg(1)->Arg(8);

void BM_Attack(benchmark::State& state) {
  const auto m = fsd::TinyModel::random({32, 32, 3}, 128, 4, 5);
  const auto img = noise_image(32, 6);
  fsd::AttackConfig cfg;
  cfg.family = static_cast<fsd::AttackFamily>(state.range(0));
  cfg.epsilon = 8.0 / 255;
  cfg.steps = 50;
  if (cfg.family == fsd::AttackFamily::sia) cfg.sia = fsd::SiaConfig{};
  for (auto _ : state) {
    benchmark::DoNotOptimize(fsd::run_attack(m, img, fsd::loss::CrossEntropy{0}, cfg));
  }
  state.SetLabel(std::string(fsd::to_string(cfg.family)));
}
BENCHMARK(BM_Attack)
    ->Arg(static_cast<int>(fsd::AttackFamily::pgd))
    ->Arg(static_cast<int>(fsd::AttackFamily::sia))
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
