#include "embalign/kernels.hpp"

#include "../row_kernel.hpp"

#include <omp.h>

#include <cmath>

namespace embalign::kernels::parallel {
namespace {

Eigen::Index num_chunks(Eigen::Index n) {
  const auto c = static_cast<Eigen::Index>(kReduceChunk);
  return (n + c - 1) / c;
}

// Pearson correlation with the same operation order as the serial kernel;
// centred rows and sums of squares are precomputed once per row.
struct Centred {
  Matrix rows;
  Vector ss;
};

Centred centre_rows(const Matrix& A) {
  const Eigen::Index m = A.cols();
  Centred c{Matrix(A.rows(), m), Vector(A.rows())};
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    double mean = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) mean += A(i, k);
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double dv = A(i, k) - mean;
      c.rows(i, k) = dv;
      ss += dv * dv;
    }
    c.ss[i] = ss;
  }
  return c;
}

double centred_pearson(const Centred& a, Eigen::Index i, const Centred& b, Eigen::Index j) {
  double sab = 0.0;
  const Eigen::Index m = a.rows.cols();
  for (Eigen::Index k = 0; k < m; ++k) sab += a.rows(i, k) * b.rows(j, k);
  return sab / std::sqrt(a.ss[i] * b.ss[j]);
}

}  // namespace

Matrix forward_batch(const MlpParams& params, const Matrix& X) {
  Matrix out(X.rows(), static_cast<Eigen::Index>(params.output_dim()));
#pragma omp parallel
  {
    detail::RowWorkspace ws(params);
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      detail::forward_row(params, X.row(i), ws);
      out.row(i) = ws.out.transpose();
    }
  }
  return out;
}

LossGrad loss_and_grad(const MlpParams& params, const Matrix& X, const Matrix& Y) {
  const Eigen::Index n = X.rows();
  const Eigen::Index chunks = num_chunks(n);
  const auto chunk = static_cast<Eigen::Index>(kReduceChunk);
  const std::size_t layers = params.num_layers();

  std::vector<std::vector<Matrix>> partial(static_cast<std::size_t>(chunks));
  std::vector<double> partial_sq(static_cast<std::size_t>(chunks), 0.0);

#pragma omp parallel
  {
    detail::RowWorkspace ws(params);
#pragma omp for schedule(static)
    for (Eigen::Index c = 0; c < chunks; ++c) {
      auto& grads = partial[static_cast<std::size_t>(c)];
      for (const auto& w : params.layers()) grads.push_back(Matrix::Zero(w.rows(), w.cols()));
      double sq = 0.0;
      const Eigen::Index end = std::min(n, (c + 1) * chunk);
      for (Eigen::Index i = c * chunk; i < end; ++i) {
        detail::forward_row(params, X.row(i), ws);
        sq += detail::backward_row(params, Y.row(i), ws, grads);
      }
      partial_sq[static_cast<std::size_t>(c)] = sq;
    }
  }

  LossGrad lg;
  lg.grads = std::move(partial[0]);
  double sq = partial_sq[0];
  for (std::size_t c = 1; c < partial.size(); ++c) {
    for (std::size_t l = 0; l < layers; ++l) lg.grads[l] += partial[c][l];
    sq += partial_sq[c];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  lg.loss = sq * inv_n;
  for (auto& g : lg.grads) g *= inv_n;
  return lg;
}

double mean_sq_error(const Matrix& pred, const Matrix& truth) {
  const Eigen::Index n = pred.rows();
  const Eigen::Index chunks = num_chunks(n);
  const auto chunk = static_cast<Eigen::Index>(kReduceChunk);
  std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    double s = 0.0;
    const Eigen::Index end = std::min(n, (c + 1) * chunk);
    for (Eigen::Index i = c * chunk; i < end; ++i) s += (pred.row(i) - truth.row(i)).squaredNorm();
    partial[static_cast<std::size_t>(c)] = s;
  }
  double s = 0.0;
  for (double p : partial) s += p;
  return s / static_cast<double>(n);
}

double clip_correlation(const Matrix& pred, const Matrix& truth) {
  const Eigen::Index n = pred.rows();
  const Centred p = centre_rows(pred);
  const Centred t = centre_rows(truth);
  std::vector<double> frac(static_cast<std::size_t>(n), 0.0);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double self = centred_pearson(p, i, t, i);
    long wins = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && self > centred_pearson(p, i, t, j)) ++wins;
    }
    frac[static_cast<std::size_t>(i)] = static_cast<double>(wins) / static_cast<double>(n - 1);
  }
  double total = 0.0;
  for (double f : frac) total += f;
  return total / static_cast<double>(n);
}

std::vector<Matrix> source_predictions(std::span<const MlpParams> models, const Matrix& X) {
  std::vector<Matrix> out(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    out[k].resize(X.rows(), static_cast<Eigen::Index>(models[k].output_dim()));
  }
  const auto n = X.rows();
  const auto K = static_cast<Eigen::Index>(models.size());
  // Flattened (source, row) space so small banks still fan out over rows.
#pragma omp parallel
  {
    std::vector<detail::RowWorkspace> ws;
    ws.reserve(models.size());
    for (const auto& model : models) ws.emplace_back(model);
#pragma omp for schedule(static)
    for (Eigen::Index t = 0; t < K * n; ++t) {
      const auto k = static_cast<std::size_t>(t / n);
      const Eigen::Index i = t % n;
      detail::forward_row(models[k], X.row(i), ws[k]);
      out[k].row(i) = ws[k].out.transpose();
    }
  }
  return out;
}

}  // namespace embalign::kernels::parallel
