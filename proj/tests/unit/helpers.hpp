#pragma once

#include "embalign/mlp.hpp"
#include "embalign/rng.hpp"
#include "embalign/types.hpp"

#include <doctest.h>

#include <cstdint>

namespace testing {

using embalign::Matrix;

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double scale = 1.0) {
  embalign::Rng rng(seed);
  Matrix M(r, c);
  for (auto& v : M.reshaped()) v = scale * rng.normal();
  return M;
}

// g++ 11 at -O3 folds a vectorised double->float->double round trip in the
// loop tail, so the narrowing goes through a volatile.
inline Matrix round_to_float(const Matrix& M) {
  Matrix out(M.rows(), M.cols());
  for (Eigen::Index i = 0; i < M.size(); ++i) {
    volatile float f = static_cast<float>(M.data()[i]);
    out.data()[i] = f;
  }
  return out;
}

inline embalign::MlpParams random_net(const std::vector<std::size_t>& dims, std::uint64_t seed,
                                      embalign::Activation act = embalign::Activation::relu(),
                                      double q = 2.0, double radius = 1.0) {
  embalign::Rng rng(seed);
  return embalign::MlpParams::random_init(dims, act, q, {}, radius, rng);
}

inline embalign::MlpParams identity_net(std::size_t d, std::size_t layers) {
  std::vector<Matrix> ws(layers, Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)));
  return embalign::MlpParams(ws, embalign::Activation::relu(), 2.0);
}

}  // namespace testing
