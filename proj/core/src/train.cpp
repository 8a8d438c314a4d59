// SPDX-License-Identifier: Apache-2.0
#include "ef/train.hpp"

#include <numeric>
#include <stdexcept>

namespace ef {

BatchStream::BatchStream(std::vector<std::size_t> pool, std::size_t batch_size, std::uint64_t seed)
    : pool_(std::move(pool)), batch_size_(batch_size), cursor_(0), rng_(seed) {
  if (pool_.empty()) throw std::invalid_argument("BatchStream: empty pool");
  if (batch_size_ == 0) throw std::invalid_argument("BatchStream: batch size must be >= 1");
  shuffle(std::span<std::size_t>(pool_), rng_);
}

std::vector<std::size_t> BatchStream::next() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  while (batch.size() < batch_size_) {
    if (cursor_ == pool_.size()) {
      shuffle(std::span<std::size_t>(pool_), rng_);
      cursor_ = 0;
    }
    batch.push_back(pool_[cursor_++]);
  }
  return batch;
}

void TrainHyper::validate() const {
  adam.validate();
  if (batch_size == 0) throw std::invalid_argument("training: batch size must be >= 1");
}

MultiHeadNet train_net(MultiHeadNet net, const Matrix& inputs, std::span<const std::size_t> pool,
                       const TrainHyper& hyper, std::uint64_t seed, const HeadLossGrad& loss,
                       const TrainHooks& hooks) {
  hyper.validate();
  if (pool.empty()) throw std::invalid_argument("training: empty training pool");
  if (hyper.iterations == 0) return net;

  BatchStream batches({pool.begin(), pool.end()}, hyper.batch_size, derive_seed(seed, 1));
  AdamState adam = AdamState::for_params(hyper.adam, net);
  std::vector<Matrix> grads(net.head_count());
  for (std::size_t t = 1; t <= hyper.iterations; ++t) {
    const auto rows = batches.next();
    const MultiHeadForward fwd = forward(net, inputs.gather_rows(rows));
    for (std::size_t h = 0; h < grads.size(); ++h) {
      grads[h] = Matrix(fwd.head_logits[h].rows(), fwd.head_logits[h].cols());
    }
    loss(rows, fwd.head_logits, grads);
    const MultiHeadNet g = backward(net, fwd, grads);
    const double rate = hooks.learning_rate ? hooks.learning_rate(t) : hyper.adam.learning_rate;
    adam_step(net, g, adam, rate);
    if (hooks.after_step) hooks.after_step(t, net);
  }
  return net;
}

MlpParams train_classifier(const MlpSpec& spec, const Dataset& data, std::span<const std::size_t> pool,
                           const TrainHyper& hyper, std::uint64_t seed, const TrainHooks& hooks) {
  spec.validate();
  data.validate();
  if (spec.input_size() != data.feature_count() || spec.output_size() != data.class_count) {
    throw std::invalid_argument("train_classifier: network shape does not match the data");
  }
  const auto& labels = data.labels;
  auto ce = [&labels](std::span<const std::size_t> rows, std::span<const Matrix> logits,
                      std::span<Matrix> grads) {
    const Matrix p = softmax(logits[0]);
    const double inv_b = 1.0 / static_cast<double>(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto pr = p.row(r);
      auto g = grads[0].row(r);
      for (std::size_t c = 0; c < pr.size(); ++c) {
        const double y = c == labels[rows[r]] ? 1.0 : 0.0;
        g[c] = (pr[c] - y) * inv_b;
      }
    }
  };
  MultiHeadNet net = as_multi_head(init_params(spec, derive_seed(seed, 0)));
  return to_mlp(train_net(std::move(net), data.inputs, pool, hyper, seed, ce, hooks));
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("accuracy: length mismatch");
  if (truth.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double accuracy(const Matrix& scores, std::span<const std::size_t> truth) {
  return accuracy(argmax_rows(scores), truth);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  std::iota(out.begin(), out.end(), std::size_t{0});
  return out;
}

}  // namespace ef
