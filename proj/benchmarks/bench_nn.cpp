// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "ef/distill.hpp"
#include "ef/matrix.hpp"
#include "ef/nn.hpp"
#include "ef/rng.hpp"

namespace {

ef::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  ef::Xoshiro256 rng(seed);
  ef::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
  return m;
}

void BM_MulAbt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ef::Matrix a = random_matrix(100, n, 1);
  const ef::Matrix b = random_matrix(50, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ef::linalg::mul_abt(a, b));
  state.SetItemsProcessed(state.iterations() * 100 * 50 * state.range(0));
}
BENCHMARK(BM_MulAbt)->Arg(50)->Arg(784);

// One training step of the 784-50-50-10 network on a batch of 100.
void BM_ForwardBackward(benchmark::State& state) {
  const ef::MlpParams params = ef::init_params(ef::MlpSpec{{784, 50, 50, 10}}, 3);
  const ef::Matrix x = random_matrix(100, 784, 4);
  const ef::Matrix grad = random_matrix(100, 10, 5);
  for (auto _ : state) {
    const ef::ForwardResult fwd = ef::forward(params, x);
    benchmark::DoNotOptimize(ef::backward(params, fwd.cache, grad));
  }
}
BENCHMARK(BM_ForwardBackward);

void BM_AdamStep(benchmark::State& state) {
  ef::MlpParams params = ef::init_params(ef::MlpSpec{{784, 50, 50, 10}}, 6);
  const ef::MlpParams grads = ef::init_params(ef::MlpSpec{{784, 50, 50, 10}}, 7);
  ef::AdamState adam = ef::AdamState::for_params(ef::AdamConfig{}, params);
  for (auto _ : state) ef::adam_step(params, grads, adam);
}
BENCHMARK(BM_AdamStep);

void BM_LossInd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<ef::Matrix> heads;
  std::vector<ef::Matrix> teachers;
  for (std::size_t j = 0; j < n; ++j) {
    heads.push_back(ef::softmax(random_matrix(100, 10, 10 + j)));
    teachers.push_back(ef::softmax(random_matrix(100, 10, 20 + j)));
  }
  const ef::Matrix labels = ef::softmax(random_matrix(100, 10, 30));
  for (auto _ : state) benchmark::DoNotOptimize(ef::distill::loss_ind(heads, teachers, labels, 0.5));
}
BENCHMARK(BM_LossInd)->Arg(3)->Arg(5);

}  // namespace
