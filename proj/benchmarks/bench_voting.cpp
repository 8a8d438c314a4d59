// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <numeric>

#include "ef/fusion.hpp"
#include "ef/rng.hpp"
#include "ef/voting.hpp"

namespace {

using ef::voting::Rule;

ef::voting::PreferenceProfile random_profile(std::size_t voters, std::size_t candidates, std::uint64_t seed) {
  ef::Xoshiro256 rng(seed);
  ef::voting::PreferenceProfile profile(candidates);
  std::vector<std::size_t> ranking(candidates);
  for (std::size_t v = 0; v < voters; ++v) {
    std::iota(ranking.begin(), ranking.end(), std::size_t{0});
    ef::shuffle(std::span<std::size_t>(ranking), rng);
    profile.add(ef::voting::Ballot(ranking));
  }
  return profile;
}

// 25 voters over 10 candidates: one example of an N=25 MNIST ensemble vote.
void BM_Elect(benchmark::State& state) {
  const auto rule = static_cast<Rule>(state.range(0));
  const auto profile = random_profile(25, 10, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ef::voting::elect(profile, rule));
  state.SetLabel(std::string(ef::voting::to_string(rule)));
}
BENCHMARK(BM_Elect)->DenseRange(0, 6);

void BM_VoteFuse(benchmark::State& state) {
  ef::Xoshiro256 rng(2);
  std::vector<ef::Matrix> models;
  for (int m = 0; m < 25; ++m) {
    ef::Matrix p(1000, 10);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double sum = 0.0;
      for (double& v : p.row(r)) sum += (v = rng.uniform() + 1e-3);
      for (double& v : p.row(r)) v /= sum;
    }
    models.push_back(std::move(p));
  }
  const ef::fusion::PredictionSet set(std::move(models));
  for (auto _ : state) benchmark::DoNotOptimize(ef::fusion::vote_fuse(set, Rule::borda));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_VoteFuse);

void BM_SpatialElection(benchmark::State& state) {
  const auto rule = static_cast<Rule>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ef::voting::spatial_election(100, 5, rule, 100, 7));
  state.SetItemsProcessed(state.iterations() * 100);
  state.SetLabel(std::string(ef::voting::to_string(rule)));
}
BENCHMARK(BM_SpatialElection)->Arg(static_cast<int>(Rule::plurality))->Arg(static_cast<int>(Rule::borda))
    ->Arg(static_cast<int>(Rule::stv));

}  // namespace
