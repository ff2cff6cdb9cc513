#pragma once

// Meta transfer learning: sparse aggregation of frozen source models by a
// multi-response lasso, then a residual correction.

#include "embalign/mlp.hpp"
#include "embalign/trainer.hpp"
#include "embalign/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace embalign {

/// K frozen source models, each d -> m.
struct SourceBank {
  std::vector<MlpParams> models;
  std::vector<std::string> labels;

  std::size_t K() const { return models.size(); }
  /// Throws ShapeError unless K >= 1, labels match and every model maps d -> m.
  void validate(std::size_t d, std::size_t m) const;
  /// FNV-1a over the labels and the model-file bytes of every model.
  std::uint64_t digest() const;
};

/// F[k] is the n x m prediction matrix of source k.
std::vector<Matrix> source_predictions(const SourceBank& bank, const Matrix& X);

/// sum_k gamma_k F[k], accumulated in index order.
Matrix aggregate(const std::vector<Matrix>& F, const Vector& gamma);

/// Sufficient statistics of the weight problem:
/// G_jk = (1/n) sum_i <F_ij, F_ik>, c_k = (1/n) sum_i <Y_i, F_ik>.
struct SourceGram {
  Matrix G;
  Vector c;
  std::size_t n = 0;
};

SourceGram source_gram(const std::vector<Matrix>& F, const Matrix& Y);

struct SigmaEstimate {
  double sigma = 0.0;
  /// The Gram matrix was singular and a ridge fit replaced least squares.
  bool ridge_fallback = false;
};

/// sqrt(RSS / (m (n - K))) of the unpenalized least-squares fit of Y on the
/// source predictions. Throws DomainError unless n > K.
SigmaEstimate estimate_sigma(const PairedDataset& data, const SourceBank& bank);

struct LassoResult {
  Vector gamma;
  std::size_t sweeps = 0;
  bool converged = false;
  /// Sources with b_k = 0; their weight is fixed at 0.
  std::vector<std::size_t> degenerate;
  /// Largest KKT violation at exit and the tolerance it was held to.
  double kkt_violation = 0.0;
  double kkt_tol = 0.0;
  bool kkt_ok = false;
};

/// Cyclic coordinate descent for
///   (1/n) sum_i ||Y_i - sum_k gamma_k F_ik||^2 + lambda ||gamma||_1.
LassoResult fit_weights_lasso(const SourceGram& gram, double lambda, double tol = 1e-10,
                              std::size_t max_sweeps = 100000);
LassoResult fit_weights_lasso(const PairedDataset& data, const SourceBank& bank, double lambda,
                              double tol = 1e-10, std::size_t max_sweeps = 100000);

/// c * sigma_hat * sqrt(max(ln K, 1) / n).
double lambda_wts(double sigma_hat, std::size_t K, std::size_t n, double c);

/// Residual fit of Y - sum_k gamma_k f_k(X) on X with the nmp_total rate.
FitResult fit_residual_mtl(const PairedDataset& data, const SourceBank& bank, const Vector& gamma,
                           const Architecture& arch, const TrainConfig& cfg);

struct MtlOptions {
  /// Constant in lambda_wts.
  double wts_c = 6.0;
  /// Multiply wts_c by sqrt(max_k b_k) so the rate is stated for unit-energy
  /// source predictions.
  bool scale_by_source_energy = true;
  double lasso_tol = 1e-10;
  std::size_t max_sweeps = 100000;
};

struct MtlModel {
  Vector gamma;
  MlpParams residual;
  std::uint64_t bank_digest = 0;
  double lambda_wts = 0.0;
  double lambda_res = 0.0;
  double sigma_hat = 0.0;
  bool sigma_ridge_fallback = false;
  LassoResult lasso;
  FitReport residual_report;
};

/// estimate_sigma -> lambda_wts -> fit_weights_lasso -> fit_residual_mtl.
/// The residual step uses step_config(cfg, 2).
MtlModel fit_mtl(const PairedDataset& data, const SourceBank& bank, const Architecture& arch,
                 const TrainConfig& cfg, const MtlOptions& opts = {});

/// residual(X) + sum_k gamma_k f_k(X). Throws IntegrityError when the bank's
/// digest differs from the one the model was fitted against.
Matrix predict_mtl(const MtlModel& model, const SourceBank& bank, const Matrix& X);

/// Smallest eigenvalue of the source Gram matrix restricted to `support`.
double restricted_eigen_diag(const SourceBank& bank, const Matrix& X,
                             const std::vector<std::size_t>& support);

}  // namespace embalign
