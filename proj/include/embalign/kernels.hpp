#pragma once

// Data-parallel hot loops. Each kernel has a serial reference and an OpenMP
// version; the library calls the parallel one, tests and bench_kernels
// compare the two.
//
// Reductions in the parallel versions run over fixed-size row chunks whose
// partial results are combined in chunk order, so their output depends on
// the inputs only, never on the thread count.

#include "embalign/mlp.hpp"
#include "embalign/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace embalign {

struct LossGrad {
  double loss = 0.0;                // (1/n) sum_i ||Y_i - f(X_i)||^2
  std::vector<Matrix> grads;        // shaped like params.layers()
};

namespace kernels {

inline constexpr std::size_t kReduceChunk = 64;

namespace serial {
Matrix forward_batch(const MlpParams& params, const Matrix& X);
LossGrad loss_and_grad(const MlpParams& params, const Matrix& X, const Matrix& Y);
double mean_sq_error(const Matrix& pred, const Matrix& truth);
double clip_correlation(const Matrix& pred, const Matrix& truth);
std::vector<Matrix> source_predictions(std::span<const MlpParams> models, const Matrix& X);
}  // namespace serial

namespace parallel {
Matrix forward_batch(const MlpParams& params, const Matrix& X);
LossGrad loss_and_grad(const MlpParams& params, const Matrix& X, const Matrix& Y);
double mean_sq_error(const Matrix& pred, const Matrix& truth);
double clip_correlation(const Matrix& pred, const Matrix& truth);
std::vector<Matrix> source_predictions(std::span<const MlpParams> models, const Matrix& X);
}  // namespace parallel

}  // namespace kernels
}  // namespace embalign
