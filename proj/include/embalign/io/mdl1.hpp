#pragma once

// MDL1 model files:
//   "MDL1" | u32 version | u32 layer_count | u8 activation [f64 slope]
//   | f64 q | [u8 bias flags, version 2 only]
//   | per layer: u32 rows, u32 cols, f64 entries row-major
//   | u64 FNV-1a digest of every preceding byte
// All integers and floats little-endian. Version 1 is written when the model
// has no bias columns, version 2 otherwise.

#include "embalign/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace embalign::io {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = kFnvOffset);

std::string encode_model(const MlpParams& params);

/// Throws a Format error naming the byte offset on bad magic, version,
/// truncation or digest, and a Data error on non-finite weights.
MlpParams decode_model(std::string_view bytes);

void write_model(const std::filesystem::path& path, const MlpParams& params);
MlpParams read_model(const std::filesystem::path& path);

/// Digest stored in a model file's trailer.
std::uint64_t model_digest(const MlpParams& params);

}  // namespace embalign::io
