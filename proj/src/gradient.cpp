#include "embalign/gradient.hpp"

#include "embalign/error.hpp"

#include <cmath>
#include <string>

namespace embalign {
namespace {

void check_xy(const MlpParams& params, const Matrix& X, const Matrix& Y) {
  if (X.rows() != Y.rows()) {
    throw_shape("loss: X has " + std::to_string(X.rows()) + " rows, Y has " +
                std::to_string(Y.rows()));
  }
  if (X.rows() == 0) throw_shape("loss: need at least one row");
  if (static_cast<std::size_t>(X.cols()) != params.input_dim()) {
    throw_shape("loss: X has " + std::to_string(X.cols()) + " columns, model expects " +
                std::to_string(params.input_dim()));
  }
  if (static_cast<std::size_t>(Y.cols()) != params.output_dim()) {
    throw_shape("loss: Y has " + std::to_string(Y.cols()) + " columns, model emits " +
                std::to_string(params.output_dim()));
  }
}

}  // namespace

LossGrad loss_and_grad(const MlpParams& params, const Matrix& X, const Matrix& Y) {
  check_xy(params, X, Y);
  LossGrad lg = kernels::parallel::loss_and_grad(params, X, Y);
  if (!std::isfinite(lg.loss)) throw_numeric("loss_and_grad: non-finite loss");
  return lg;
}

double mse_loss(const MlpParams& params, const Matrix& X, const Matrix& Y) {
  check_xy(params, X, Y);
  const double loss = kernels::parallel::mean_sq_error(kernels::parallel::forward_batch(params, X), Y);
  if (!std::isfinite(loss)) throw_numeric("mse_loss: non-finite loss");
  return loss;
}

double mean_sq_error(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw_shape("mean_sq_error: shapes differ");
  }
  if (pred.rows() == 0) throw_shape("mean_sq_error: no rows");
  return kernels::parallel::mean_sq_error(pred, truth);
}

}  // namespace embalign
