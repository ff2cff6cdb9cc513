#pragma once

#include "embalign/activation.hpp"
#include "embalign/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace embalign {

class Rng;

/// Weights of one layer, shape p_{l+1} x p_l.
using LayerWeights = Matrix;

/// Optional bias handling. A bias is a constant-1 coordinate appended to the
/// input of a layer, so the bias column is part of that layer's weight
/// matrix and of its lq norm.
struct BiasMode {
  bool input = false;   // append 1 to x before theta_0
  bool hidden = false;  // append 1 after every hidden activation

  bool operator==(const BiasMode&) const = default;
};

/// Hidden widths plus activation; input/output widths come from the data.
struct Architecture {
  std::vector<std::size_t> hidden;
  Activation activation = Activation::relu();
  BiasMode bias;
};

/// Parameters theta_0 .. theta_L of f(x) = theta_L f_L(theta_{L-1} ... f_1(theta_0 x)).
class MlpParams {
 public:
  /// Validates conformability, finiteness and q in [1, 2].
  MlpParams(std::vector<LayerWeights> layers, Activation activation, double q,
            BiasMode bias = {});

  /// All-zero network with the given layer widths p_0 .. p_{L+1}.
  static MlpParams zeros(const std::vector<std::size_t>& dims, Activation activation,
                         double q, BiasMode bias = {});

  /// Entries uniform on [-a, a], a = 1/sqrt(rows * cols), then projected into
  /// the lq ball of `radius` (skipped when radius <= 0).
  static MlpParams random_init(const std::vector<std::size_t>& dims, Activation activation,
                               double q, BiasMode bias, double radius, Rng& rng);

  /// L: number of activations (= layers - 1).
  std::size_t depth() const { return layers_.size() - 1; }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  /// p_0 = d, ..., p_{L+1} = m (bias coordinates excluded).
  const std::vector<std::size_t>& dims() const { return dims_; }
  /// Number of weight entries, bias columns included.
  std::size_t p_total() const;
  std::size_t p_max() const;

  const std::vector<LayerWeights>& layers() const { return layers_; }
  const LayerWeights& layer(std::size_t l) const { return layers_[l]; }
  LayerWeights& layer(std::size_t l) { return layers_[l]; }
  const LayerWeights& last() const { return layers_.back(); }

  const Activation& activation() const { return activation_; }
  double q() const { return q_; }
  const BiasMode& bias() const { return bias_; }

  /// max_l ||theta_l||_q.
  double max_layer_norm() const;
  bool is_feasible(double radius = 1.0, double slack = 1e-9) const;
  bool all_finite() const;

  bool operator==(const MlpParams& other) const;

 private:
  void check_shapes() const;

  std::vector<LayerWeights> layers_;
  Activation activation_;
  double q_;
  BiasMode bias_;
  std::vector<std::size_t> dims_;
};

/// Layer widths p_0..p_{L+1} for an architecture mapping d -> m.
std::vector<std::size_t> layer_dims(const Architecture& arch, std::size_t d, std::size_t m);

/// p_total for an architecture before any parameters exist.
std::size_t p_total_for(const Architecture& arch, std::size_t d, std::size_t m);

Vector forward(const MlpParams& params, std::span<const double> x);
Vector forward(const MlpParams& params, const Vector& x);

/// Row i equals forward(params, X.row(i)) bit-exactly.
Matrix forward_batch(const MlpParams& params, const Matrix& X);

}  // namespace embalign
