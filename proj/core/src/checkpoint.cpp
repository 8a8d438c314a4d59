// SPDX-License-Identifier: Apache-2.0
#include "ef/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ef/errors.hpp"

namespace ef {
namespace {

constexpr std::string_view kMagic = "EFCKPT01";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t to_u32(std::size_t v) {
  if (v > std::numeric_limits<std::uint32_t>::max()) throw std::invalid_argument("checkpoint: dimension too large");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated data");
  }

  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params) {
  validate_chain(params.layers);
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.reserve(kMagic.size() + 4 + params.parameter_count() * 8 + params.layers.size() * 8);
  put_u32(out, to_u32(params.layers.size()));
  for (const auto& layer : params.layers) {
    put_u32(out, to_u32(layer.weight.rows()));
    put_u32(out, to_u32(layer.weight.cols()));
    for (double w : layer.weight.values()) put_f64(out, w);
    for (double b : layer.bias) put_f64(out, b);
  }
  return out;
}

MlpParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  Reader in(bytes);
  in.skip(kMagic.size());
  const std::uint32_t layers = in.u32();
  if (layers == 0) throw DataError("checkpoint: no layers");
  MlpParams params;
  for (std::uint32_t k = 0; k < layers; ++k) {
    const std::size_t rows = in.u32();
    const std::size_t cols = in.u32();
    if (rows * cols + rows > in.remaining() / 8) throw DataError("checkpoint: truncated data");
    std::vector<double> w(rows * cols);
    for (double& v : w) v = in.f64();
    std::vector<double> b(rows);
    for (double& v : b) v = in.f64();
    try {
      params.layers.push_back({Matrix(rows, cols, std::move(w)), std::move(b)});
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("checkpoint: ") + e.what());
    }
  }
  if (in.remaining() != 0) throw DataError("checkpoint: trailing bytes");
  try {
    validate_chain(params.layers);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

MlpParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace ef
