#include "embalign/io/mdl1.hpp"

#include "bytes.hpp"
#include "embalign/io/emb1.hpp"

#include <cmath>

namespace embalign::io {

using detail::put;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string encode_model(const MlpParams& params) {
  const bool has_bias = params.bias().input || params.bias().hidden;
  std::string out = "MDL1";
  put<std::uint32_t>(out, has_bias ? 2 : 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.num_layers()));
  const Activation& act = params.activation();
  put<std::uint8_t>(out, static_cast<std::uint8_t>(act.kind()));
  if (act.kind() == Activation::Kind::LeakyReLU) put<double>(out, act.slope());
  put<double>(out, params.q());
  if (has_bias) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>((params.bias().input ? 1 : 0) |
                                                     (params.bias().hidden ? 2 : 0)));
  }
  for (const auto& w : params.layers()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(w.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) put<double>(out, w.data()[i]);
  }
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

MlpParams decode_model(std::string_view bytes) {
  auto fail = [](std::size_t offset, const std::string& msg) -> Error {
    return Error(ErrorKind::Format, "MDL1: " + msg + " at byte " + std::to_string(offset));
  };
  if (bytes.size() < 4 || bytes.substr(0, 4) != "MDL1") throw fail(0, "bad magic");
  if (bytes.size() < 12) {
    throw Error(ErrorKind::Format, "MDL1: truncated header, " + std::to_string(bytes.size()) + " bytes");
  }
  const std::string_view body = bytes.substr(0, bytes.size() >= 8 ? bytes.size() - 8 : 0);
  detail::Reader r(bytes, "MDL1");
  r.take(4);
  const auto version = r.get<std::uint32_t>("version");
  if (version != 1 && version != 2) throw fail(4, "unsupported version " + std::to_string(version));
  const auto layer_count = r.get<std::uint32_t>("layer_count");
  if (layer_count == 0) throw fail(8, "zero layers");
  const std::size_t act_at = r.pos();
  const auto code = r.get<std::uint8_t>("activation");
  Activation act = Activation::relu();
  switch (code) {
    case 0: break;
    case 1: {
      const double slope = r.get<double>("slope");
      if (!(slope > 0.0 && slope < 1.0)) throw fail(act_at + 1, "leaky slope outside (0, 1)");
      act = Activation::leaky_relu(slope);
      break;
    }
    case 2: act = Activation::tanh(); break;
    default: throw fail(act_at, "unknown activation code " + std::to_string(code));
  }
  const std::size_t q_at = r.pos();
  const double q = r.get<double>("q");
  if (!(q >= 1.0 && q <= 2.0)) throw fail(q_at, "q outside [1, 2]");
  BiasMode bias;
  if (version == 2) {
    const auto flags = r.get<std::uint8_t>("bias flags");
    if (flags > 3) throw fail(r.pos() - 1, "unknown bias flags");
    bias.input = (flags & 1) != 0;
    bias.hidden = (flags & 2) != 0;
  }
  std::vector<LayerWeights> layers;
  layers.reserve(layer_count);
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    const auto rows = r.get<std::uint32_t>("layer rows");
    const auto cols = r.get<std::uint32_t>("layer cols");
    const std::uint64_t need = static_cast<std::uint64_t>(rows) * cols * 8;
    if (r.remaining() < need + 8) {
      throw Error(ErrorKind::Format, "MDL1: layer " + std::to_string(l) + " at byte " +
                                         std::to_string(r.pos()) + " needs " + std::to_string(need) +
                                         " payload bytes plus digest, have " +
                                         std::to_string(r.remaining()));
    }
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = r.get<double>("weights");
    layers.push_back(std::move(w));
  }
  if (r.remaining() != 8) {
    throw fail(r.pos(), "expected 8-byte digest, found " + std::to_string(r.remaining()) + " trailing bytes");
  }
  const std::size_t digest_at = r.pos();
  const auto stored = r.get<std::uint64_t>("digest");
  if (stored != fnv1a(body)) throw fail(digest_at, "digest mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].allFinite()) {
      throw Error(ErrorKind::Data, "MDL1: layer " + std::to_string(l) + " has non-finite weights");
    }
  }
  try {
    return MlpParams(std::move(layers), act, q, bias);
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, std::string("MDL1: ") + e.what());
  }
}

void write_model(const std::filesystem::path& path, const MlpParams& params) {
  write_file(path, encode_model(params));
}

MlpParams read_model(const std::filesystem::path& path) {
  try {
    return decode_model(read_file(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Usage) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::uint64_t model_digest(const MlpParams& params) {
  const std::string bytes = encode_model(params);
  return fnv1a(std::string_view(bytes).substr(0, bytes.size() - 8));
}

}  // namespace embalign::io
