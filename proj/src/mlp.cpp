#include "embalign/mlp.hpp"

#include "embalign/error.hpp"
#include "embalign/kernels.hpp"
#include "embalign/lq.hpp"
#include "embalign/rng.hpp"
#include "row_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace embalign {
namespace {

void check_q(double q) {
  if (!(q >= 1.0 && q <= 2.0)) throw_domain("q must lie in [1, 2], got " + std::to_string(q));
}

}  // namespace

MlpParams::MlpParams(std::vector<LayerWeights> layers, Activation activation, double q,
                     BiasMode bias)
    : layers_(std::move(layers)), activation_(activation), q_(q), bias_(bias) {
  check_q(q_);
  if (layers_.empty()) throw_shape("an MLP needs at least one layer");
  check_shapes();
  if (!all_finite()) throw_numeric("MLP weights contain non-finite entries");

  dims_.reserve(layers_.size() + 1);
  dims_.push_back(static_cast<std::size_t>(layers_.front().cols()) - (bias_.input ? 1 : 0));
  for (const auto& w : layers_) dims_.push_back(static_cast<std::size_t>(w.rows()));
}

void MlpParams::check_shapes() const {
  if (bias_.input && layers_.front().cols() < 1) throw_shape("input bias needs a bias column");
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const auto expected = layers_[l].rows() + (bias_.hidden ? 1 : 0);
    if (layers_[l + 1].cols() != expected) {
      throw_shape("layer " + std::to_string(l + 1) + " has " +
                  std::to_string(layers_[l + 1].cols()) + " columns, expected " +
                  std::to_string(expected));
    }
  }
}

MlpParams MlpParams::zeros(const std::vector<std::size_t>& dims, Activation activation, double q,
                           BiasMode bias) {
  if (dims.size() < 2) throw_shape("an MLP needs at least input and output widths");
  std::vector<LayerWeights> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::size_t cols = dims[l];
    if (l == 0 && bias.input) ++cols;
    if (l > 0 && bias.hidden) ++cols;
    layers.push_back(Matrix::Zero(static_cast<Eigen::Index>(dims[l + 1]),
                                  static_cast<Eigen::Index>(cols)));
  }
  return MlpParams(std::move(layers), activation, q, bias);
}

MlpParams MlpParams::random_init(const std::vector<std::size_t>& dims, Activation activation,
                                 double q, BiasMode bias, double radius, Rng& rng) {
  MlpParams p = zeros(dims, activation, q, bias);
  for (auto& w : p.layers_) {
    const double a = 1.0 / std::sqrt(static_cast<double>(w.rows() * w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-a, a);
    if (radius > 0.0) w = project_lq_ball(w, q, radius);
  }
  return p;
}

std::size_t MlpParams::p_total() const {
  std::size_t total = 0;
  for (const auto& w : layers_) total += static_cast<std::size_t>(w.size());
  return total;
}

std::size_t MlpParams::p_max() const {
  // max over l in 0..L-1 of p_{l+1}: the widest hidden layer.
  std::size_t best = 0;
  for (std::size_t l = 1; l + 1 < dims_.size(); ++l) best = std::max(best, dims_[l]);
  return best;
}

double MlpParams::max_layer_norm() const {
  double best = 0.0;
  for (const auto& w : layers_) best = std::max(best, entrywise_lq_norm(w, q_));
  return best;
}

bool MlpParams::is_feasible(double radius, double slack) const {
  return max_layer_norm() <= radius + slack;
}

bool MlpParams::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [](const LayerWeights& w) { return w.allFinite(); });
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (!(activation_ == other.activation_) || !(bias_ == other.bias_)) return false;
  if (std::memcmp(&q_, &other.q_, sizeof q_) != 0) return false;
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (!bit_equal(layers_[l], other.layers_[l])) return false;
  }
  return true;
}

std::vector<std::size_t> layer_dims(const Architecture& arch, std::size_t d, std::size_t m) {
  std::vector<std::size_t> dims;
  dims.push_back(d);
  for (auto h : arch.hidden) {
    if (h == 0) throw_domain("hidden widths must be positive");
    dims.push_back(h);
  }
  dims.push_back(m);
  return dims;
}

std::size_t p_total_for(const Architecture& arch, std::size_t d, std::size_t m) {
  const auto dims = layer_dims(arch, d, m);
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::size_t cols = dims[l];
    if (l == 0 && arch.bias.input) ++cols;
    if (l > 0 && arch.bias.hidden) ++cols;
    total += dims[l + 1] * cols;
  }
  return total;
}

namespace detail {

RowWorkspace::RowWorkspace(const MlpParams& params) {
  const std::size_t L = params.depth();
  h.resize(L + 1);
  z.resize(L);
  for (std::size_t l = 0; l <= L; ++l) h[l].resize(params.layer(l).cols());
  for (std::size_t l = 0; l < L; ++l) z[l].resize(params.layer(l).rows());
  out.resize(params.last().rows());
}

}  // namespace detail

Vector forward(const MlpParams& params, std::span<const double> x) {
  if (x.size() != params.input_dim()) {
    throw_shape("forward: input has length " + std::to_string(x.size()) + ", expected " +
                std::to_string(params.input_dim()));
  }
  detail::RowWorkspace ws(params);
  const Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(x.size()));
  detail::forward_row(params, row, ws);
  return ws.out;
}

Vector forward(const MlpParams& params, const Vector& x) {
  return forward(params, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

Matrix forward_batch(const MlpParams& params, const Matrix& X) {
  if (static_cast<std::size_t>(X.cols()) != params.input_dim()) {
    throw_shape("forward_batch: X has " + std::to_string(X.cols()) + " columns, expected " +
                std::to_string(params.input_dim()));
  }
  return kernels::parallel::forward_batch(params, X);
}

}  // namespace embalign
