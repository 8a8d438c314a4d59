// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary parameter files: "EFCKPT01", u32 layer count, then per layer u32
// rows, u32 cols, rows*cols f64 weights (row-major), rows f64 biases. All
// integers and floats little-endian.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ef/nn.hpp"

namespace ef {

[[nodiscard]] std::vector<std::uint8_t> encode_checkpoint(const MlpParams& params);
/// Throws DataError on a bad magic, truncation, trailing bytes or a broken layer chain.
[[nodiscard]] MlpParams decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params);
[[nodiscard]] MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace ef
