// Serial reference kernels. Straight loops in row order; kept for testing the
// OpenMP versions and as the baseline in bench_kernels.

#include "embalign/kernels.hpp"

#include "../row_kernel.hpp"

#include <cmath>

namespace embalign::kernels::serial {

Matrix forward_batch(const MlpParams& params, const Matrix& X) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(params.output_dim()));
  detail::RowWorkspace ws(params);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    detail::forward_row(params, X.row(i), ws);
    out.row(i) = ws.out.transpose();
  }
  return out;
}

LossGrad loss_and_grad(const MlpParams& params, const Matrix& X, const Matrix& Y) {
  LossGrad lg;
  for (const auto& w : params.layers()) lg.grads.push_back(Matrix::Zero(w.rows(), w.cols()));
  detail::RowWorkspace ws(params);
  double sq = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    detail::forward_row(params, X.row(i), ws);
    sq += detail::backward_row(params, Y.row(i), ws, lg.grads);
  }
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  lg.loss = sq * inv_n;
  for (auto& g : lg.grads) g *= inv_n;
  return lg;
}

double mean_sq_error(const Matrix& pred, const Matrix& truth) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) s += (pred.row(i) - truth.row(i)).squaredNorm();
  return s / static_cast<double>(pred.rows());
}

double clip_correlation(const Matrix& pred, const Matrix& truth) {
  const Eigen::Index n = pred.rows();
  const Eigen::Index m = pred.cols();
  auto pearson = [m](const auto& a, const auto& b) {
    double ma = 0.0, mb = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) { ma += a[k]; mb += b[k]; }
    ma /= static_cast<double>(m);
    mb /= static_cast<double>(m);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double da = a[k] - ma;
      const double db = b[k] - mb;
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
    return sab / std::sqrt(saa * sbb);
  };
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double self = pearson(pred.row(i), truth.row(i));
    long wins = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (self > pearson(pred.row(i), truth.row(j))) ++wins;
    }
    total += static_cast<double>(wins) / static_cast<double>(n - 1);
  }
  return total / static_cast<double>(n);
}

std::vector<Matrix> source_predictions(std::span<const MlpParams> models, const Matrix& X) {
  std::vector<Matrix> out;
  out.reserve(models.size());
  for (const auto& model : models) out.push_back(serial::forward_batch(model, X));
  return out;
}

}  // namespace embalign::kernels::serial
