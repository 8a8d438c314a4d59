// SPDX-License-Identifier: Apache-2.0
#include "ef/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ef/errors.hpp"
#include "ef/rng.hpp"

namespace ef {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

// Whole file, inflated if it starts with the gzip magic bytes.
std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (raw.size() < 2 || raw[0] != 0x1f || raw[1] != 0x8b) return raw;

  gzFile gz = gzopen(path.string().c_str(), "rb");
  if (gz == nullptr) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> buf{};
  for (;;) {
    const int n = gzread(gz, buf.data(), static_cast<unsigned>(buf.size()));
    if (n < 0) {
      gzclose(gz);
      throw DataError("corrupt gzip stream in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), buf.begin(), buf.begin() + n);
  }
  gzclose(gz);
  return out;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw DataError("truncated IDX header in " + path.string());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void check_magic(std::uint32_t found, std::uint32_t expected, const std::filesystem::path& path) {
  if (found != expected) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "magic 0x%08x, expected 0x%08x", found, expected);
    throw DataError("bad IDX magic in " + path.string() + ": " + buf);
  }
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.inputs = inputs.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  out.class_count = class_count;
  return out;
}

void Dataset::validate() const {
  if (inputs.rows() != labels.size()) throw std::invalid_argument("Dataset: row and label counts differ");
  for (std::size_t y : labels) {
    if (y >= class_count) throw std::invalid_argument("Dataset: label out of range");
  }
}

Matrix one_hot(std::span<const std::size_t> labels, std::size_t class_count) {
  Matrix out(labels.size(), class_count);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= class_count) throw std::invalid_argument("one_hot: label out of range");
    out(r, labels[r]) = 1.0;
  }
  return out;
}

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_maybe_gzip(images);
  const auto lab = read_maybe_gzip(labels);

  check_magic(read_be32(img, 0, images), kImageMagic, images);
  const std::size_t count = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t pixels = rows * cols;
  if (img.size() != 16 + count * pixels) {
    throw DataError("IDX image file " + images.string() + " has " + std::to_string(img.size()) +
                    " bytes, header implies " + std::to_string(16 + count * pixels));
  }

  check_magic(read_be32(lab, 0, labels), kLabelMagic, labels);
  const std::size_t label_count = read_be32(lab, 4, labels);
  if (lab.size() != 8 + label_count) {
    throw DataError("IDX label file " + labels.string() + " has " + std::to_string(lab.size()) +
                    " bytes, header implies " + std::to_string(8 + label_count));
  }
  if (label_count != count) {
    throw DataError("IDX count mismatch: " + std::to_string(count) + " images vs " +
                    std::to_string(label_count) + " labels");
  }

  Dataset data;
  data.class_count = 10;
  data.inputs = Matrix(count, pixels);
  auto dst = data.inputs.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(img[16 + i]) / 255.0;
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (lab[8 + i] >= 10) throw DataError("label " + std::to_string(lab[8 + i]) + " out of range in " + labels.string());
    data.labels[i] = lab[8 + i];
  }
  return data;
}

void save_mnist_idx(const Dataset& data, const std::filesystem::path& images,
                    const std::filesystem::path& labels, std::size_t rows, std::size_t cols) {
  data.validate();
  if (rows * cols != data.feature_count()) throw std::invalid_argument("save_mnist_idx: rows*cols must equal the feature count");
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw std::runtime_error("save_mnist_idx: cannot open output files");
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (double v : data.inputs.values()) {
    img.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (std::size_t y : data.labels) lab.put(static_cast<char>(y));
  if (!img || !lab) throw std::runtime_error("save_mnist_idx: write failed");
}

void BlobSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("blobs: need at least two classes");
  if (dims < 1) throw std::invalid_argument("blobs: need at least one dimension");
  if (per_class < 1) throw std::invalid_argument("blobs: per_class must be >= 1");
  if (!(spread >= 0.0) || !std::isfinite(spread)) throw std::invalid_argument("blobs: spread must be >= 0");
  if (!(separation > 0.0) || !std::isfinite(separation)) throw std::invalid_argument("blobs: separation must be > 0");
}

Matrix blob_centers(const BlobSpec& spec) {
  spec.validate();
  Matrix centers(spec.classes, spec.dims);
  if (spec.dims == 1) {
    for (std::size_t k = 0; k < spec.classes; ++k) centers(k, 0) = static_cast<double>(k) * spec.separation;
    return centers;
  }
  const double radius = spec.separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(spec.classes)));
  for (std::size_t k = 0; k < spec.classes; ++k) {
    const double angle = std::numbers::pi * (2.0 * static_cast<double>(k) / static_cast<double>(spec.classes) + 1.0);
    centers(k, 0) = radius * std::cos(angle);
    centers(k, 1) = radius * std::sin(angle);
  }
  return centers;
}

Dataset synth_blobs(const BlobSpec& spec) {
  const Matrix centers = blob_centers(spec);
  Xoshiro256 rng(spec.seed);
  Dataset data;
  data.class_count = spec.classes;
  data.inputs = Matrix(spec.per_class * spec.classes, spec.dims);
  data.labels.reserve(data.inputs.rows());
  std::size_t r = 0;
  for (std::size_t k = 0; k < spec.classes; ++k) {
    for (std::size_t i = 0; i < spec.per_class; ++i, ++r) {
      for (std::size_t d = 0; d < spec.dims; ++d) data.inputs(r, d) = centers(k, d) + spec.spread * rng.normal();
      data.labels.push_back(k);
    }
  }
  return data;
}

}  // namespace ef
