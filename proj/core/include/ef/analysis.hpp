// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ef/matrix.hpp"

namespace ef::analysis {

struct AmbiguityReport {
  double bias = 0.0;
  double var = 0.0;
  double covar = 0.0;
  double lhs_mse = 0.0;
  double rhs_total = 0.0;
};

/// `outputs` is R replicates x M members. Expectations are means over the R
/// rows. Throws std::invalid_argument when R < 2 or M < 1.
[[nodiscard]] AmbiguityReport ambiguity_decompose(const Matrix& outputs, double target);

/// Entry (i, j) is the fraction of examples where models i and j agree.
[[nodiscard]] Matrix similarity_matrix(std::span<const std::vector<std::size_t>> label_preds);
/// Mean of the off-diagonal entries; 1 for a 1x1 matrix.
[[nodiscard]] double mean_off_diagonal(const Matrix& similarity);

struct MetricsReport {
  double accuracy = 0.0;
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double threshold = 0.5;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

/// Binary metrics with score >= threshold counted positive. Precision, recall
/// and F1 are 0 when their denominator is 0.
[[nodiscard]] MetricsReport metrics(std::span<const double> scores, std::span<const std::uint8_t> labels,
                                    double threshold);

/// Accuracy-maximizing threshold among 0, 1 and the midpoints of consecutive
/// distinct scores; the smallest wins ties.
[[nodiscard]] double select_threshold(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace ef::analysis
