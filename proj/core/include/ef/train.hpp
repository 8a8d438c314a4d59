// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minibatch Adam training shared by plain classifiers, teachers and students.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "ef/data.hpp"
#include "ef/nn.hpp"

namespace ef {

/// Endless minibatches over a pool of row indices: the pool is reshuffled
/// each time it is exhausted and batches run across reshuffles, so every
/// batch has exactly batch_size rows.
class BatchStream {
 public:
  BatchStream(std::vector<std::size_t> pool, std::size_t batch_size, std::uint64_t seed);

  [[nodiscard]] std::vector<std::size_t> next();

 private:
  std::vector<std::size_t> pool_;
  std::size_t batch_size_;
  std::size_t cursor_;
  Xoshiro256 rng_;
};

struct TrainHyper {
  AdamConfig adam;
  std::size_t batch_size = 100;
  std::size_t iterations = 100;

  void validate() const;
};

/// Writes dLoss/dLogits for each head of the batch `rows` into `grads`
/// (already shaped like the logits).
using HeadLossGrad = std::function<void(std::span<const std::size_t> rows,
                                        std::span<const Matrix> head_logits,
                                        std::span<Matrix> grads)>;

struct TrainHooks {
  /// Learning rate at 1-based iteration t; the Adam config rate when unset.
  std::function<double(std::size_t t)> learning_rate;
  /// Called after the update of iteration t.
  std::function<void(std::size_t t, const MultiHeadNet& net)> after_step;
};

/// Runs hyper.iterations Adam steps. Batches come from
/// BatchStream(pool, batch_size, derive_seed(seed, 1)).
[[nodiscard]] MultiHeadNet train_net(MultiHeadNet net, const Matrix& inputs,
                                     std::span<const std::size_t> pool, const TrainHyper& hyper,
                                     std::uint64_t seed, const HeadLossGrad& loss,
                                     const TrainHooks& hooks = {});

/// Cross-entropy training from init_params(spec, derive_seed(seed, 0)) on the
/// rows in `pool`.
[[nodiscard]] MlpParams train_classifier(const MlpSpec& spec, const Dataset& data,
                                         std::span<const std::size_t> pool,
                                         const TrainHyper& hyper, std::uint64_t seed,
                                         const TrainHooks& hooks = {});

/// Fraction of positions where predicted == truth.
[[nodiscard]] double accuracy(std::span<const std::size_t> predicted,
                              std::span<const std::size_t> truth);
[[nodiscard]] double accuracy(const Matrix& scores, std::span<const std::size_t> truth);

/// Ascending 0..n-1.
[[nodiscard]] std::vector<std::size_t> all_indices(std::size_t n);

}  // namespace ef
