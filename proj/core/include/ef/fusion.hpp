// SPDX-License-Identifier: Apache-2.0
#pragma once

// Decision fusion over per-model class-probability predictions.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ef/matrix.hpp"
#include "ef/voting.hpp"

namespace ef::fusion {

/// M row-stochastic B x K matrices, one per model.
class PredictionSet {
 public:
  /// Throws std::invalid_argument on an empty set, mismatched shapes, or a row
  /// whose sum is off by more than 1e-9.
  explicit PredictionSet(std::vector<Matrix> models);

  [[nodiscard]] std::size_t model_count() const noexcept { return models_.size(); }
  [[nodiscard]] std::size_t batch_size() const noexcept { return models_.front().rows(); }
  [[nodiscard]] std::size_t class_count() const noexcept { return models_.front().cols(); }
  [[nodiscard]] const Matrix& model(std::size_t i) const noexcept { return models_[i]; }
  [[nodiscard]] const std::vector<Matrix>& models() const noexcept { return models_; }

 private:
  std::vector<Matrix> models_;
};

[[nodiscard]] Matrix average_fuse(const PredictionSet& preds);

/// Classes by descending probability, lower index first on ties.
[[nodiscard]] voting::Ballot to_ranking(std::span<const double> probabilities);

/// Per example: one ballot per model, winner under `rule`.
[[nodiscard]] std::vector<std::size_t> vote_fuse(const PredictionSet& preds, voting::Rule rule);

struct BayesState {
  std::vector<double> log_likelihood;  // log P[D | h_i]
  std::vector<double> log_prior;       // log P[h_i]
};

/// Log-likelihood of the validation labels under each model (probabilities
/// floored at 1e-12). `prior` defaults to uniform.
[[nodiscard]] BayesState bayes_fit(const PredictionSet& validation,
                                   std::span<const std::size_t> labels,
                                   std::optional<std::vector<double>> prior = std::nullopt);
/// argmax_y sum_i P(y|x,h_i) P[D|h_i] P[h_i], evaluated with the posterior
/// weights shifted by their maximum in log space.
[[nodiscard]] std::vector<std::size_t> bayes_fuse(const PredictionSet& preds, const BayesState& state);

struct StackedWeights {
  std::vector<double> weights;
  double ridge = 0.0;
};

inline constexpr double kDefaultRidge = 1e-8;

/// Least-squares combination weights from (F^T F + ridge I) w = F^T t, where
/// column i of F is model i's flattened output.
[[nodiscard]] StackedWeights stack_fit(const PredictionSet& validation, const Matrix& targets,
                                       double ridge = kDefaultRidge);

struct StackedOutput {
  Matrix scores;  // weighted sum, not renormalized
  std::vector<std::size_t> labels;
};

[[nodiscard]] StackedOutput stack_fuse(const PredictionSet& preds, const StackedWeights& weights);

}  // namespace ef::fusion
