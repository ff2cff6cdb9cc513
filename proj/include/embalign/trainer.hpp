#pragma once

// Proximal-projected SGD for
//   argmin_{Theta in M_q(radius)} (1/n) sum_i ||Y_i - f_Theta(X_i)||^2 + lambda ||theta_L||_q^q
// and the theory-rate choice of lambda.

#include "embalign/mlp.hpp"
#include "embalign/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace embalign {

/// lambda = c * v * sqrt(L (ln log_arg)^3 / n).
struct TheoryRate {
  double c = 0.1;
};

struct FixedLambda {
  double lambda = 0.0;
};

using LambdaMode = std::variant<TheoryRate, FixedLambda>;

struct TrainConfig {
  double q = 2.0;
  LambdaMode lambda_mode = TheoryRate{};
  /// When set and lambda_mode is TheoryRate, c is chosen from c_grid by
  /// validation MSE (needs val_fraction > 0).
  bool select_c = false;
  std::vector<double> c_grid = {0.01, 0.1, 1.0};
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  /// Learning rate is multiplied by this after every epoch.
  double lr_decay = 1.0;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  std::size_t patience = 10;
  double constraint_radius = 1.0;
  /// Off only for ablations; the M_q constraint is otherwise applied every step.
  bool enforce_constraint = true;
  /// Minimum validation improvement that resets the patience counter.
  double tol = 1e-10;

  /// Throws DomainError on out-of-range fields.
  void validate() const;
};

struct FitReport {
  double final_objective = 0.0;
  double lambda_used = 0.0;
  std::size_t epochs_run = 0;
  std::optional<double> best_val_loss;
  /// Penalized training objective after each epoch.
  std::vector<double> objective_trace;
  /// Set when c was grid-selected.
  std::optional<double> selected_c;
};

struct FitResult {
  MlpParams params;
  FitReport report;
};

/// Quantities the lambda rate needs besides c and L.
struct RateInputs {
  double v = 0.0;        // v_infinity of the predictors
  double log_arg = 0.0;  // argument of the log, e.g. 2 m n p_total
  std::size_t n = 0;     // sample size in the rate
};

/// c * v * sqrt(L (ln log_arg)^3 / n). Throws DomainError unless n >= 1,
/// log_arg > 1, L >= 1, v >= 0 and c > 0.
double lambda_rate(double v, std::size_t L, double log_arg, std::size_t n, double c);

/// Rate inputs for the baseline problem: v_infty(X) and log(2 m n p_total).
RateInputs baseline_rate_inputs(const Matrix& X, std::size_t m, std::size_t p_total);

/// Core solver with lambda already resolved. Each step: gradient step on the
/// smooth loss, prox of step*lambda*|.|^q on theta_L, projection of every
/// layer onto the lq ball. Validation (a prefix of a seeded shuffle) drives
/// early stopping and the returned parameters are the best seen on it,
/// initial point included. Throws NumericError on NaN or objective > 1e12,
/// DomainError when fewer than 2 training rows remain.
///
/// When val_pool is set, validation rows are drawn from the first *val_pool
/// rows only and the remaining rows always train; unset means every row.
FitResult fit_penalized(const Matrix& X, const Matrix& Y, const Architecture& arch,
                        const TrainConfig& cfg, double lambda,
                        std::optional<std::size_t> val_pool = std::nullopt);

/// fit_penalized with lambda from cfg.lambda_mode: FixedLambda as given,
/// TheoryRate via lambda_rate(rate) (and grid-selected c when cfg.select_c).
FitResult fit_with_rate(const Matrix& X, const Matrix& Y, const Architecture& arch,
                        const TrainConfig& cfg, const RateInputs& rate,
                        std::optional<std::size_t> val_pool = std::nullopt);

/// fit_with_rate on the baseline rate inputs.
FitResult fit_penalized(const Matrix& X, const Matrix& Y, const Architecture& arch,
                        const TrainConfig& cfg);

/// A fitted d -> m map plus provenance.
struct AlignmentModel {
  MlpParams params;
  FitReport report;
  std::string tag;
};

AlignmentModel fit_baseline(const PairedDataset& data, const Architecture& arch,
                            const TrainConfig& cfg);

/// Penalized objective (1/n) sum ||Y - f(X)||^2 + lambda ||theta_L||_q^q.
double penalized_objective(const MlpParams& params, const Matrix& X, const Matrix& Y,
                           double lambda);

/// Copy of cfg whose seed is mixed with `step`; used for pipeline stages.
TrainConfig step_config(const TrainConfig& cfg, std::uint64_t step);

}  // namespace embalign
