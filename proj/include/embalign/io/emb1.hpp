#pragma once

// EMB1 embedding files:
//   "EMB1" | u32 version = 1 | u32 rows | u32 cols | f32 payload row-major
// All little-endian.

#include "embalign/types.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace embalign::io {

/// Values are rounded to binary32. Throws a Data error on non-finite input
/// or values outside the binary32 range.
std::string encode_embeddings(const Matrix& M);

/// Throws a Format error on bad magic/version or a payload of the wrong
/// length, a Data error on non-finite values.
Matrix decode_embeddings(std::string_view bytes);

void write_embeddings(const std::filesystem::path& path, const Matrix& M);
Matrix read_embeddings(const std::filesystem::path& path);

/// Whole-file helpers shared by the readers and writers.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace embalign::io
