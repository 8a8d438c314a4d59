// SPDX-License-Identifier: Apache-2.0
#include "ef/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ef::analysis {
namespace {

void require_binary(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("metrics: scores and labels differ in length");
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("metrics: scores must lie in [0, 1]");
  }
  for (auto y : labels) {
    if (y > 1) throw std::invalid_argument("metrics: labels must be 0 or 1");
  }
}

double safe_ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

AmbiguityReport ambiguity_decompose(const Matrix& outputs, double target) {
  const std::size_t r_count = outputs.rows();
  const std::size_t m_count = outputs.cols();
  if (r_count < 2) throw std::invalid_argument("ambiguity_decompose: need at least two replicates");
  if (m_count < 1) throw std::invalid_argument("ambiguity_decompose: need at least one member");
  const double inv_r = 1.0 / static_cast<double>(r_count);
  const double m = static_cast<double>(m_count);

  std::vector<double> mean(m_count, 0.0);
  for (std::size_t r = 0; r < r_count; ++r) {
    for (std::size_t i = 0; i < m_count; ++i) mean[i] += outputs(r, i);
  }
  for (double& v : mean) v *= inv_r;

  AmbiguityReport rep;
  for (std::size_t i = 0; i < m_count; ++i) rep.bias += mean[i] - target;
  rep.bias /= m;

  double var_sum = 0.0;
  double cov_sum = 0.0;
  for (std::size_t r = 0; r < r_count; ++r) {
    double dev_sum = 0.0;
    double dev_sq = 0.0;
    double avg = 0.0;
    for (std::size_t i = 0; i < m_count; ++i) {
      const double d = outputs(r, i) - mean[i];
      dev_sum += d;
      dev_sq += d * d;
      avg += outputs(r, i);
    }
    var_sum += dev_sq;
    cov_sum += dev_sum * dev_sum - dev_sq;  // sum over i != j of d_i d_j
    avg /= m;
    rep.lhs_mse += (avg - target) * (avg - target);
  }
  rep.var = var_sum * inv_r / m;
  rep.covar = m_count > 1 ? cov_sum * inv_r / (m * (m - 1.0)) : 0.0;
  rep.lhs_mse *= inv_r;
  rep.rhs_total = rep.bias * rep.bias + rep.var / m + (1.0 - 1.0 / m) * rep.covar;
  return rep;
}

Matrix similarity_matrix(std::span<const std::vector<std::size_t>> label_preds) {
  if (label_preds.empty()) throw std::invalid_argument("similarity_matrix: no models");
  const std::size_t b = label_preds.front().size();
  if (b == 0) throw std::invalid_argument("similarity_matrix: no examples");
  for (const auto& p : label_preds) {
    if (p.size() != b) throw std::invalid_argument("similarity_matrix: ragged predictions");
  }
  const std::size_t m = label_preds.size();
  Matrix s(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    s(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      std::size_t same = 0;
      for (std::size_t k = 0; k < b; ++k) same += label_preds[i][k] == label_preds[j][k] ? 1 : 0;
      s(i, j) = s(j, i) = static_cast<double>(same) / static_cast<double>(b);
    }
  }
  return s;
}

double mean_off_diagonal(const Matrix& similarity) {
  const std::size_t m = similarity.rows();
  if (m == 0 || similarity.cols() != m) throw std::invalid_argument("mean_off_diagonal: need a square matrix");
  if (m == 1) return 1.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j) sum += similarity(i, j);
    }
  }
  return sum / static_cast<double>(m * (m - 1));
}

MetricsReport metrics(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  require_binary(scores, labels);
  if (scores.empty()) throw std::invalid_argument("metrics: empty input");
  MetricsReport rep;
  rep.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++rep.tp;
    else if (predicted) ++rep.fp;
    else if (actual) ++rep.fn;
    else ++rep.tn;
  }
  rep.accuracy = safe_ratio(rep.tp + rep.tn, scores.size());
  rep.precision = safe_ratio(rep.tp, rep.tp + rep.fp);
  rep.recall = safe_ratio(rep.tp, rep.tp + rep.fn);
  const double den = rep.precision + rep.recall;
  rep.f1 = den > 0.0 ? 2.0 * rep.precision * rep.recall / den : 0.0;
  return rep;
}

double select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  require_binary(scores, labels);
  if (scores.empty()) throw std::invalid_argument("select_threshold: empty input");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<double> candidates{0.0, 1.0};
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  std::sort(candidates.begin(), candidates.end());

  double best = candidates.front();
  std::size_t best_hits = 0;
  bool first = true;
  for (double t : candidates) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) hits += (scores[i] >= t) == (labels[i] == 1) ? 1 : 0;
    if (first || hits > best_hits) {
      best = t;
      best_hits = hits;
      first = false;
    }
  }
  return best;
}

}  // namespace ef::analysis
