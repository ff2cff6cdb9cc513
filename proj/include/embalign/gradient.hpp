#pragma once

#include "embalign/kernels.hpp"
#include "embalign/mlp.hpp"

namespace embalign {

/// Mean squared l2 loss (1/n) sum_i ||Y_i - f(X_i)||^2 and its exact gradient
/// by reverse accumulation through the layer recursion. The penalty is not
/// included. Throws ShapeError on mismatched shapes or n = 0, NumericError on
/// a non-finite forward pass.
LossGrad loss_and_grad(const MlpParams& params, const Matrix& X, const Matrix& Y);

/// Loss only.
double mse_loss(const MlpParams& params, const Matrix& X, const Matrix& Y);

/// (1/n) sum_i ||pred_i - truth_i||^2.
double mean_sq_error(const Matrix& pred, const Matrix& truth);

}  // namespace embalign
