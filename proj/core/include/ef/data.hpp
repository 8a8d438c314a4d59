// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ef/matrix.hpp"

namespace ef {

struct Dataset {
  Matrix inputs;                    // one example per row
  std::vector<std::size_t> labels;  // class index per row
  std::size_t class_count = 0;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] std::size_t feature_count() const noexcept { return inputs.cols(); }
  /// Examples at `indices`, in that order.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;
  /// Throws std::invalid_argument if rows and labels disagree or a label is out of range.
  void validate() const;
};

[[nodiscard]] Matrix one_hot(std::span<const std::size_t> labels, std::size_t class_count);

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Either file may be gzip-compressed. Pixels are scaled by 1/255. Labels
/// must be < 10. Throws DataError on a missing or malformed file.
[[nodiscard]] Dataset load_mnist_idx(const std::filesystem::path& images,
                                     const std::filesystem::path& labels);

/// Writes uncompressed IDX files; pixels are rounded from [0,1] to bytes.
void save_mnist_idx(const Dataset& data, const std::filesystem::path& images,
                    const std::filesystem::path& labels, std::size_t rows, std::size_t cols);

struct BlobSpec {
  std::size_t per_class = 100;
  std::size_t classes = 2;
  std::size_t dims = 2;
  double spread = 0.1;       // per-coordinate standard deviation
  double separation = 2.0;   // distance between neighbouring centers
  std::uint64_t seed = 0;

  void validate() const;
};

/// Class centers: for dims >= 2 the vertices of a regular K-gon in the first
/// two coordinates with neighbouring vertices `separation` apart (K = 2 gives
/// (+-separation/2, 0)); for dims = 1 the points k * separation.
[[nodiscard]] Matrix blob_centers(const BlobSpec& spec);
/// per_class Gaussian samples around each center, grouped by class.
[[nodiscard]] Dataset synth_blobs(const BlobSpec& spec);

}  // namespace ef
