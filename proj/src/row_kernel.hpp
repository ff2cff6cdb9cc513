#pragma once

// Per-sample forward/backward pass shared by every forward path, so that
// batch and single-row evaluation produce identical bits.

#include "embalign/mlp.hpp"

#include <vector>

namespace embalign::detail {

struct RowWorkspace {
  std::vector<Vector> h;  // h[l] = input to layer l (bias coordinate appended when enabled)
  std::vector<Vector> z;  // z[l] = theta_l h[l], l < L
  Vector out;
  Vector g_out;
  Vector g_h;
  Vector g_z;

  explicit RowWorkspace(const MlpParams& params);
};

/// Runs the forward recursion on x, leaving activations in ws; result in ws.out.
template <class Row>
void forward_row(const MlpParams& params, const Row& x, RowWorkspace& ws) {
  const auto& layers = params.layers();
  const std::size_t L = params.depth();
  const auto& act = params.activation();
  const std::size_t d = params.input_dim();

  Vector& h0 = ws.h[0];
  for (std::size_t j = 0; j < d; ++j) h0[static_cast<Eigen::Index>(j)] = x[static_cast<Eigen::Index>(j)];
  if (params.bias().input) h0[static_cast<Eigen::Index>(d)] = 1.0;

  for (std::size_t l = 0; l < L; ++l) {
    ws.z[l].noalias() = layers[l] * ws.h[l];
    Vector& next = ws.h[l + 1];
    const Eigen::Index width = ws.z[l].size();
    for (Eigen::Index k = 0; k < width; ++k) next[k] = act.apply(ws.z[l][k]);
    if (params.bias().hidden) next[width] = 1.0;
  }
  ws.out.noalias() = layers[L] * ws.h[L];
}

/// Accumulates the gradient of ||out - y||^2 (without the 1/n factor) into
/// grads; requires a preceding forward_row on the same workspace. Returns the
/// row's squared error.
template <class Row>
double backward_row(const MlpParams& params, const Row& y, RowWorkspace& ws,
                    std::vector<Matrix>& grads) {
  const auto& layers = params.layers();
  const std::size_t L = params.depth();
  const auto& act = params.activation();

  ws.g_out = ws.out - y.transpose();
  const double sq = ws.g_out.squaredNorm();
  ws.g_out *= 2.0;

  grads[L].noalias() += ws.g_out * ws.h[L].transpose();
  if (L == 0) return sq;

  const Eigen::Index width_L = ws.z[L - 1].size();
  ws.g_h.noalias() = layers[L].leftCols(width_L).transpose() * ws.g_out;
  for (std::size_t l = L; l-- > 0;) {
    const Eigen::Index width = ws.z[l].size();
    ws.g_z.resize(width);
    for (Eigen::Index k = 0; k < width; ++k) ws.g_z[k] = ws.g_h[k] * act.derivative(ws.z[l][k]);
    grads[l].noalias() += ws.g_z * ws.h[l].transpose();
    if (l > 0) {
      const Eigen::Index in_width = ws.z[l - 1].size();
      ws.g_h.noalias() = layers[l].leftCols(in_width).transpose() * ws.g_z;
    }
  }
  return sq;
}

}  // namespace embalign::detail
