// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared helpers for the unit tests: random fixtures and a central
// finite-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ef/matrix.hpp"
#include "ef/rng.hpp"

namespace ef::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Xoshiro256& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

/// Rows drawn uniformly from the simplex interior (normalized exponentials).
inline Matrix random_stochastic(std::size_t rows, std::size_t cols, Xoshiro256& rng) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (double& v : m.row(r)) {
      v = -std::log(1.0 - rng.uniform()) + 1e-3;
      sum += v;
    }
    for (double& v : m.row(r)) v /= sum;
  }
  return m;
}

inline Matrix random_onehot(std::size_t rows, std::size_t cols, Xoshiro256& rng) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) m(r, rng.below(cols)) = 1.0;
  return m;
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
  return std::abs(analytic - numeric) / scale;
}

/// Worst relative error between `analytic` and central differences of `loss`
/// over `coords` random coordinates of `params`. `params` and `analytic` are
/// parallel tensor lists.
inline double fd_max_error(std::span<const std::span<double>> params,
                           std::span<const std::span<const double>> analytic,
                           const std::function<double()>& loss, std::size_t coords, Xoshiro256& rng,
                           double h = 1e-5) {
  std::size_t total = 0;
  for (const auto& t : params) total += t.size();
  double worst = 0.0;
  for (std::size_t k = 0; k < coords; ++k) {
    std::size_t flat = rng.below(total);
    std::size_t t = 0;
    while (flat >= params[t].size()) flat -= params[t++].size();
    double& x = params[t][flat];
    const double saved = x;
    x = saved + h;
    const double up = loss();
    x = saved - h;
    const double down = loss();
    x = saved;
    worst = std::max(worst, relative_error(analytic[t][flat], (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace ef::test
