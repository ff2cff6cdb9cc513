#include "embalign/io/emb1.hpp"

#include "bytes.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace embalign::io {

using detail::put;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Usage, "cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Usage, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Usage, "write to " + path.string() + " failed");
}

std::string encode_embeddings(const Matrix& M) {
  constexpr double kMax = std::numeric_limits<float>::max();
  std::string out = "EMB1";
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(M.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(M.cols()));
  out.reserve(out.size() + static_cast<std::size_t>(M.size()) * 4);
  for (Eigen::Index i = 0; i < M.size(); ++i) {
    const double v = M.data()[i];
    if (!std::isfinite(v) || std::abs(v) > kMax) {
      throw Error(ErrorKind::Data, "embedding value at flat index " + std::to_string(i) +
                                       " is not representable as a finite binary32");
    }
    put<float>(out, static_cast<float>(v));
  }
  return out;
}

Matrix decode_embeddings(std::string_view bytes) {
  detail::Reader r(bytes, "EMB1");
  if (bytes.size() < 4 || r.take(4) != "EMB1") throw Error(ErrorKind::Format, "EMB1: bad magic at byte 0");
  const auto version = r.get<std::uint32_t>("version");
  if (version != 1) throw Error(ErrorKind::Format, "EMB1: unsupported version " + std::to_string(version) + " at byte 4");
  const auto rows = r.get<std::uint32_t>("rows");
  const auto cols = r.get<std::uint32_t>("cols");
  const std::uint64_t expected = static_cast<std::uint64_t>(rows) * cols * 4;
  if (r.remaining() != expected) {
    throw Error(ErrorKind::Format, "EMB1: payload at byte 16 should be " + std::to_string(expected) +
                                       " bytes, found " + std::to_string(r.remaining()));
  }
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < M.size(); ++i) {
    const float v = r.get<float>("payload");
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::Data, "EMB1: non-finite value at byte " + std::to_string(r.pos() - 4));
    }
    M.data()[i] = v;
  }
  return M;
}

void write_embeddings(const std::filesystem::path& path, const Matrix& M) {
  write_file(path, encode_embeddings(M));
}

Matrix read_embeddings(const std::filesystem::path& path) {
  try {
    return decode_embeddings(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Usage) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace embalign::io
