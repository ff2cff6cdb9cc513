#pragma once

// Inverse semi-supervised learning: inverse map, augmented fit on
// pseudo-predictors, residual debiasing.

#include "embalign/mlp.hpp"
#include "embalign/trainer.hpp"
#include "embalign/types.hpp"

namespace embalign {

struct IslArchitectures {
  Architecture inverse;
  Architecture augmented;
  Architecture residual;
};

struct IslLambdas {
  double inv = 0.0;
  double aug = 0.0;
  double res = 0.0;
};

struct IslModel {
  MlpParams inverse;    // m -> d
  MlpParams augmented;  // d -> m
  MlpParams residual;   // d -> m
  IslLambdas lambdas;
  std::size_t n_paired = 0;
  std::size_t n_unpaired = 0;
  FitReport inverse_report;
  FitReport augmented_report;
  FitReport residual_report;
};

/// Regresses X on Y; lambda rate from v_infty(Y) and n d p_total.
FitResult fit_inverse(const PairedDataset& data, const Architecture& arch, const TrainConfig& cfg);

/// Row i is forward(inverse, Yu_i).
Matrix make_pseudo_predictors(const MlpParams& inverse, const UnpairedResponses& Yu);

/// Fit on the pooled rows (X, Y) then (pseudo, Yu); rate from v_infty of the
/// pooled predictors and (n + N) m p_total over n + N samples.
FitResult fit_augmented(const PairedDataset& data, const Matrix& pseudo,
                        const UnpairedResponses& Yu, const Architecture& arch,
                        const TrainConfig& cfg);

/// Fit of Y - augmented(X) on X; rate from v_infty(X) and n m p_total.
FitResult fit_residual(const PairedDataset& data, const MlpParams& augmented,
                       const Architecture& arch, const TrainConfig& cfg);

/// Steps 1-3 with seeds step_config(cfg, 1), (cfg, 2) and (cfg, 3). Errors
/// are rethrown with the step index prepended.
IslModel fit_isl(const PairedDataset& data, const UnpairedResponses& Yu,
                 const IslArchitectures& archs, const TrainConfig& cfg);

/// forward_batch(augmented, X) + forward_batch(residual, X).
Matrix predict_isl(const IslModel& model, const Matrix& X);

}  // namespace embalign
