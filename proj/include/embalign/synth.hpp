#pragma once

// Synthetic alignment worlds with known ground truth, noise level, unpaired
// response quality and multi-subject source structure.

#include "embalign/mlp.hpp"
#include "embalign/mtl.hpp"
#include "embalign/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

namespace embalign {

/// f*(x) = A x with X ~ N(0, sigma_x). A is m x d.
struct LinearGaussian {
  Matrix A;
  Matrix sigma_x;
};

/// f* is a random feasible member of M_q with the given architecture;
/// X is uniform on [-input_scale, input_scale]^d.
struct MlpTruth {
  Architecture arch;
  double q = 2.0;
  double input_scale = 1.0;
};

using TruthKind = std::variant<LinearGaussian, MlpTruth>;

/// Unpaired Y drawn from fresh X through the truth.
struct Informative {};

/// Unpaired Y independent of everything: Gaussian with mean shift_scale * sigma
/// in every coordinate and a per-coordinate spread mismatched to Y's.
struct Adversarial {
  double shift_scale = 3.0;
};

using UnpairedKind = std::variant<Informative, Adversarial>;

/// Target truth sum_k gamma*_k f_k + delta f_res over K random sources that
/// share the MlpTruth architecture.
struct MultiSubjectSpec {
  std::size_t K = 1;
  std::size_t s_star = 1;
  /// Empty means: random support of size s_star with magnitudes in [0.5, 1.5]
  /// and random signs.
  Vector gamma_star;
  double residual_scale = 0.0;
};

struct WorldSpec {
  std::size_t d = 1;
  std::size_t m = 1;
  TruthKind truth = MlpTruth{};
  double sigma = 0.1;
  UnpairedKind unpaired = Informative{};
  std::optional<MultiSubjectSpec> subjects;
  std::uint64_t seed = 0;

  /// Throws DomainError on invalid dimensions, covariances or subject specs.
  void validate() const;
};

/// Evaluable f*: either a linear map or a weighted sum of networks.
struct GroundTruth {
  std::optional<Matrix> A;
  std::vector<MlpParams> nets;
  Vector weights;

  Matrix evaluate(const Matrix& X) const;
};

/// Realized multi-subject structure.
struct SubjectRecord {
  Vector gamma_star;
  std::vector<std::size_t> support;
  /// Monte Carlo estimate of E||delta f_res(X)||^2.
  double c_aux = 0.0;
};

struct GeneratedWorld {
  WorldSpec spec;
  GroundTruth truth;
  PairedDataset paired;
  UnpairedResponses unpaired;
  PairedDataset test;
  /// f*(X_test) without noise.
  Matrix test_clean;
  std::optional<SourceBank> bank;
  std::optional<SubjectRecord> subjects;
};

GeneratedWorld generate(const WorldSpec& spec, std::size_t n, std::size_t N, std::size_t n_test);

/// Draws `count` predictor rows from the world's X distribution.
Matrix sample_predictors(const WorldSpec& spec, std::size_t count, Rng& rng);

struct McEstimate {
  double value = 0.0;
  double se = 0.0;
};

using PredictFn = std::function<Matrix(const Matrix&)>;

/// Monte Carlo E||f_hat(X) - f*(X)||^2 over fresh X draws from a stream
/// derived from the world seed and `stream`.
McEstimate oracle_mse(const PredictFn& f_hat, const GeneratedWorld& world, std::size_t n_mc,
                      std::uint64_t stream = 0);

/// g*(y) = Sigma_XY Sigma_YY^{-1} y for LinearGaussian worlds, as the d x m
/// matrix G. Throws DomainError for other truths.
Matrix inverse_oracle(const GeneratedWorld& world);

/// Monte Carlo E||g_hat(Y) - g*(Y)||^2 with (X, Y) drawn from the world.
McEstimate inverse_error(const PredictFn& g_hat, const GeneratedWorld& world, std::size_t n_mc,
                         std::uint64_t stream = 0);

struct SourceWorld {
  SourceBank bank;
  GroundTruth truth;
  SubjectRecord record;
};

/// Random feasible sources and the composed target. Requires subjects and an
/// MlpTruth truth kind.
SourceWorld make_source_bank(const WorldSpec& spec);

/// Random network whose layers lie on the boundary of the radius-1 lq ball:
/// entries uniform on [-1, 1], then projected.
MlpParams random_feasible_net(const std::vector<std::size_t>& dims, const Architecture& arch,
                              double q, Rng& rng);

/// Linear-Gaussian truth whose X covariance is concentrated on the row space
/// of A: signal_scale^2 there, nuisance_scale^2 on its complement. A has
/// entry-wise l2 norm a_norm.
LinearGaussian random_linear_gaussian(std::size_t d, std::size_t m, double a_norm,
                                      double signal_scale, double nuisance_scale, Rng& rng);

}  // namespace embalign
