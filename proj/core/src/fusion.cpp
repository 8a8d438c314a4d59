// SPDX-License-Identifier: Apache-2.0
#include "ef/fusion.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "ef/nn.hpp"

namespace ef::fusion {

PredictionSet::PredictionSet(std::vector<Matrix> models) : models_(std::move(models)) {
  if (models_.empty()) throw std::invalid_argument("PredictionSet: at least one model required");
  for (std::size_t i = 0; i < models_.size(); ++i) {
    require_same_shape(models_[i], models_.front(), "PredictionSet");
    if (models_[i].cols() == 0) throw std::invalid_argument("PredictionSet: zero classes");
    if (max_row_sum_error(models_[i]) > 1e-9) {
      throw std::invalid_argument("PredictionSet: model " + std::to_string(i) + " is not row-stochastic");
    }
    for (double v : models_[i].values()) {
      if (v < 0.0) throw std::invalid_argument("PredictionSet: negative probability");
    }
  }
}

Matrix average_fuse(const PredictionSet& preds) {
  Matrix out(preds.batch_size(), preds.class_count());
  auto dst = out.values();
  for (const auto& m : preds.models()) {
    const auto src = m.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const auto count = static_cast<double>(preds.model_count());
  for (double& v : dst) v /= count;
  return out;
}

voting::Ballot to_ranking(std::span<const double> probabilities) {
  std::vector<voting::Candidate> order(probabilities.size());
  std::iota(order.begin(), order.end(), voting::Candidate{0});
  std::stable_sort(order.begin(), order.end(), [&](voting::Candidate a, voting::Candidate b) {
    return probabilities[a] > probabilities[b];
  });
  return voting::Ballot(std::move(order));
}

std::vector<std::size_t> vote_fuse(const PredictionSet& preds, voting::Rule rule) {
  const auto rules = voting::all_rules();
  if (std::find(rules.begin(), rules.end(), rule) == rules.end()) {
    throw std::invalid_argument("vote_fuse: invalid rule");
  }
  std::vector<std::size_t> labels(preds.batch_size());
  for (std::size_t b = 0; b < preds.batch_size(); ++b) {
    voting::PreferenceProfile profile(preds.class_count());
    for (const auto& m : preds.models()) profile.add(to_ranking(m.row(b)));
    labels[b] = voting::elect(profile, rule);
  }
  return labels;
}

BayesState bayes_fit(const PredictionSet& validation, std::span<const std::size_t> labels,
                     std::optional<std::vector<double>> prior) {
  if (labels.size() != validation.batch_size()) {
    throw std::invalid_argument("bayes_fit: label count does not match the batch size");
  }
  const std::size_t m = validation.model_count();
  BayesState state;
  state.log_likelihood.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Matrix& p = validation.model(i);
    double ll = 0.0;
    for (std::size_t b = 0; b < labels.size(); ++b) {
      if (labels[b] >= p.cols()) throw std::invalid_argument("bayes_fit: label out of range");
      ll += std::log(std::max(p(b, labels[b]), kLogFloor));
    }
    state.log_likelihood[i] = ll;
  }
  if (prior) {
    if (prior->size() != m) throw std::invalid_argument("bayes_fit: prior length does not match the model count");
    for (double q : *prior) {
      if (!(q > 0.0) || !std::isfinite(q)) throw std::invalid_argument("bayes_fit: prior entries must be positive");
      state.log_prior.push_back(std::log(q));
    }
  } else {
    state.log_prior.assign(m, -std::log(static_cast<double>(m)));
  }
  return state;
}

std::vector<std::size_t> bayes_fuse(const PredictionSet& preds, const BayesState& state) {
  const std::size_t m = preds.model_count();
  if (state.log_likelihood.size() != m || state.log_prior.size() != m) {
    throw std::invalid_argument("bayes_fuse: state does not match the model count");
  }
  std::vector<double> weight(m);
  for (std::size_t i = 0; i < m; ++i) weight[i] = state.log_likelihood[i] + state.log_prior[i];
  const double peak = *std::max_element(weight.begin(), weight.end());
  for (double& w : weight) w = std::exp(w - peak);

  std::vector<std::size_t> labels(preds.batch_size());
  std::vector<double> score(preds.class_count());
  for (std::size_t b = 0; b < preds.batch_size(); ++b) {
    std::fill(score.begin(), score.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto row = preds.model(i).row(b);
      for (std::size_t k = 0; k < row.size(); ++k) score[k] += row[k] * weight[i];
    }
    labels[b] = argmax(score);
  }
  return labels;
}

StackedWeights stack_fit(const PredictionSet& validation, const Matrix& targets, double ridge) {
  require_same_shape(targets, validation.model(0), "stack_fit");
  const std::size_t m = validation.model_count();
  if (targets.size() < m) throw std::invalid_argument("stack_fit: need B*K >= model count");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw std::invalid_argument("stack_fit: ridge must be >= 0");

  Eigen::MatrixXd gram(m, m);
  Eigen::VectorXd rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto fi = validation.model(i).values();
    double r = 0.0;
    for (std::size_t n = 0; n < fi.size(); ++n) r += fi[n] * targets.values()[n];
    rhs(static_cast<Eigen::Index>(i)) = r;
    for (std::size_t j = 0; j <= i; ++j) {
      const auto fj = validation.model(j).values();
      double g = 0.0;
      for (std::size_t n = 0; n < fi.size(); ++n) g += fi[n] * fj[n];
      gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g;
      gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = g;
    }
    gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += ridge;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("stack_fit: normal equations are singular");
  const Eigen::VectorXd w = llt.solve(rhs);
  StackedWeights out{std::vector<double>(w.data(), w.data() + w.size()), ridge};
  for (double v : out.weights) {
    if (!std::isfinite(v)) throw std::runtime_error("stack_fit: non-finite weights");
  }
  return out;
}

StackedOutput stack_fuse(const PredictionSet& preds, const StackedWeights& weights) {
  if (weights.weights.size() != preds.model_count()) {
    throw std::invalid_argument("stack_fuse: weight count does not match the model count");
  }
  StackedOutput out{Matrix(preds.batch_size(), preds.class_count()), {}};
  auto dst = out.scores.values();
  for (std::size_t i = 0; i < preds.model_count(); ++i) {
    const auto src = preds.model(i).values();
    const double w = weights.weights[i];
    for (std::size_t n = 0; n < dst.size(); ++n) dst[n] += w * src[n];
  }
  out.labels = argmax_rows(out.scores);
  return out;
}

}  // namespace ef::fusion
