// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal fully connected network engine: dense layers with ReLU hidden
// activations, temperature softmax, cross-entropy / KL losses, exact
// reverse-mode gradients and Adam.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ef/matrix.hpp"
#include "ef/rng.hpp"

namespace ef {

inline constexpr double kLogFloor = 1e-12;

enum class Activation { relu };

struct MlpSpec {
  /// Input size, hidden sizes..., output size.
  std::vector<std::size_t> layer_sizes;
  Activation hidden_activation = Activation::relu;

  void validate() const;
  [[nodiscard]] std::size_t input_size() const { return layer_sizes.front(); }
  [[nodiscard]] std::size_t output_size() const { return layer_sizes.back(); }
  [[nodiscard]] std::size_t layer_count() const { return layer_sizes.size() - 1; }
};

struct DenseLayer {
  Matrix weight;              // out x in
  std::vector<double> bias;   // out

  [[nodiscard]] std::size_t in_size() const { return weight.cols(); }
  [[nodiscard]] std::size_t out_size() const { return weight.rows(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] std::size_t input_size() const { return layers.front().in_size(); }
  [[nodiscard]] std::size_t output_size() const { return layers.back().out_size(); }
  /// Weight then bias of every layer, in layer order.
  [[nodiscard]] std::vector<std::span<double>> tensors();
  [[nodiscard]] std::vector<std::span<const double>> tensors() const;
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

/// Throws std::invalid_argument unless consecutive layers chain (cols == previous rows)
/// and bias lengths match.
void validate_chain(std::span<const DenseLayer> layers);

/// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
[[nodiscard]] DenseLayer init_dense(std::size_t in, std::size_t out, Xoshiro256& rng);
[[nodiscard]] MlpParams init_params(const MlpSpec& spec, std::uint64_t seed);

struct ForwardCache {
  std::vector<Matrix> layer_inputs;     // input fed to each layer
  std::vector<Matrix> pre_activations;  // affine output of each layer
};

struct ForwardResult {
  Matrix logits;
  ForwardCache cache;
};

[[nodiscard]] ForwardResult forward(const MlpParams& params, const Matrix& inputs);
/// forward() without keeping the activation record.
[[nodiscard]] Matrix predict_logits(const MlpParams& params, const Matrix& inputs);
/// Gradients of a scalar loss w.r.t. every parameter, given dLoss/dLogits.
[[nodiscard]] MlpParams backward(const MlpParams& params, const ForwardCache& cache,
                                 const Matrix& grad_logits);

/// Row-wise softmax of logits / temperature with max subtraction.
[[nodiscard]] Matrix softmax_t(const Matrix& logits, double temperature);
[[nodiscard]] Matrix softmax(const Matrix& logits);

/// Batch mean of -sum_i y_i log(max(p_i, 1e-12)).
[[nodiscard]] double cross_entropy(const Matrix& probs, const Matrix& labels_onehot);
/// Batch mean of sum_i p_i log(p_i / max(q_i, 1e-12)), with 0 log 0 = 0.
[[nodiscard]] double kl_divergence(const Matrix& p, const Matrix& q);

/// Network with a shared trunk (every trunk layer ReLU-activated) feeding one
/// or more independent linear heads. A single-head net is the same function
/// as an MlpParams whose last layer is the head.
struct MultiHeadNet {
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> heads;

  [[nodiscard]] std::size_t head_count() const { return heads.size(); }
  [[nodiscard]] std::vector<std::span<double>> tensors();
  [[nodiscard]] std::vector<std::span<const double>> tensors() const;
  friend bool operator==(const MultiHeadNet&, const MultiHeadNet&) = default;
};

[[nodiscard]] MultiHeadNet as_multi_head(const MlpParams& params);
/// Inverse of as_multi_head; requires exactly one head.
[[nodiscard]] MlpParams to_mlp(const MultiHeadNet& net);

struct MultiHeadForward {
  std::vector<Matrix> head_logits;
  ForwardCache trunk_cache;
  Matrix features;  // trunk output (or the raw input when the trunk is empty)
};

[[nodiscard]] MultiHeadForward forward(const MultiHeadNet& net, const Matrix& inputs);
[[nodiscard]] std::vector<Matrix> predict_head_logits(const MultiHeadNet& net, const Matrix& inputs);
[[nodiscard]] MultiHeadNet backward(const MultiHeadNet& net, const MultiHeadForward& fwd,
                                    std::span<const Matrix> head_grads);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;

  void validate() const;
};

/// Moment accumulators shaped like the parameter tensors they update.
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static AdamState for_tensors(const AdamConfig& config, std::span<const std::span<const double>> shapes);
  static AdamState for_params(const AdamConfig& config, const MlpParams& params);
  static AdamState for_params(const AdamConfig& config, const MultiHeadNet& net);
};

/// One bias-corrected Adam update at the given rate; increments state.step.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               double learning_rate);
/// Updates at state.config.learning_rate.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state);
void adam_step(MultiHeadNet& net, const MultiHeadNet& grads, AdamState& state, double learning_rate);

}  // namespace ef
