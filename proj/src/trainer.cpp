#include "embalign/trainer.hpp"

#include "embalign/error.hpp"
#include "embalign/gradient.hpp"
#include "embalign/lq.hpp"
#include "embalign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace embalign {
namespace {

constexpr double kDivergence = 1e12;

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

std::size_t rate_depth(const Architecture& arch) {
  // A single linear layer has no hidden depth; the rate needs L >= 1.
  return std::max<std::size_t>(arch.hidden.size(), 1);
}

std::vector<std::size_t> slice(const std::vector<std::size_t>& v, std::size_t begin,
                               std::size_t end) {
  return {v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end)};
}

}  // namespace

void TrainConfig::validate() const {
  if (!(q >= 1.0 && q <= 2.0)) throw_domain("train config: q must lie in [1, 2]");
  if (epochs < 1) throw_domain("train config: epochs must be >= 1");
  if (batch_size < 1) throw_domain("train config: batch_size must be >= 1");
  if (!finite_positive(learning_rate)) throw_domain("train config: learning_rate must be > 0");
  if (!(std::isfinite(lr_decay) && lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw_domain("train config: lr_decay must lie in (0, 1]");
  }
  if (!(std::isfinite(val_fraction) && val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw_domain("train config: val_fraction must lie in [0, 1)");
  }
  if (!finite_positive(constraint_radius)) throw_domain("train config: constraint_radius must be > 0");
  if (!finite_positive(tol)) throw_domain("train config: tol must be > 0");
  if (const auto* fixed = std::get_if<FixedLambda>(&lambda_mode)) {
    if (!(std::isfinite(fixed->lambda) && fixed->lambda >= 0.0)) {
      throw_domain("train config: fixed lambda must be finite and >= 0");
    }
  } else {
    if (!finite_positive(std::get<TheoryRate>(lambda_mode).c)) {
      throw_domain("train config: theory-rate constant c must be > 0");
    }
  }
  if (select_c) {
    if (c_grid.empty()) throw_domain("train config: c_grid is empty");
    for (double c : c_grid) {
      if (!finite_positive(c)) throw_domain("train config: c_grid entries must be > 0");
    }
  }
}

double lambda_rate(double v, std::size_t L, double log_arg, std::size_t n, double c) {
  if (n < 1) throw_domain("lambda_rate: n must be >= 1");
  if (L < 1) throw_domain("lambda_rate: L must be >= 1");
  if (!(std::isfinite(log_arg) && log_arg > 1.0)) throw_domain("lambda_rate: log argument must be > 1");
  if (!(std::isfinite(v) && v >= 0.0)) throw_domain("lambda_rate: v must be >= 0");
  if (!finite_positive(c)) throw_domain("lambda_rate: c must be > 0");
  const double lg = std::log(log_arg);
  return c * v * std::sqrt(static_cast<double>(L) * lg * lg * lg / static_cast<double>(n));
}

RateInputs baseline_rate_inputs(const Matrix& X, std::size_t m, std::size_t p_total) {
  const auto n = static_cast<std::size_t>(X.rows());
  return {v_infty(X), 2.0 * static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(p_total), n};
}

double penalized_objective(const MlpParams& params, const Matrix& X, const Matrix& Y,
                           double lambda) {
  double obj = mse_loss(params, X, Y);
  if (lambda > 0.0) obj += lambda * entrywise_lq_power(params.last(), params.q());
  return obj;
}

FitResult fit_penalized(const Matrix& X, const Matrix& Y, const Architecture& arch,
                        const TrainConfig& cfg, double lambda,
                        std::optional<std::size_t> val_pool) {
  cfg.validate();
  if (!(std::isfinite(lambda) && lambda >= 0.0)) throw_domain("fit: lambda must be finite and >= 0");
  if (X.rows() != Y.rows()) {
    throw_shape("fit: X has " + std::to_string(X.rows()) + " rows, Y has " + std::to_string(Y.rows()));
  }
  if (!X.allFinite() || !Y.allFinite()) throw_numeric("fit: training data contain non-finite values");

  const auto n = static_cast<std::size_t>(X.rows());
  const std::size_t pool = std::min(val_pool.value_or(n), n);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(pool)));
  if (n < 2 || n - n_val < 2) {
    throw_domain("fit: need at least 2 training rows after the validation split, have " +
                 std::to_string(n >= n_val ? n - n_val : 0));
  }

  const Rng root(cfg.seed);
  Rng split_rng = root.split(1);
  Rng init_rng = root.split(2);
  Rng shuffle_rng = root.split(3);

  auto perm = split_rng.permutation(pool);
  for (std::size_t i = pool; i < n; ++i) perm.push_back(i);
  const Matrix X_val = gather_rows(X, slice(perm, 0, n_val));
  const Matrix Y_val = gather_rows(Y, slice(perm, 0, n_val));
  const Matrix X_tr = gather_rows(X, slice(perm, n_val, n));
  const Matrix Y_tr = gather_rows(Y, slice(perm, n_val, n));
  const std::size_t n_tr = n - n_val;
  const bool use_val = n_val > 0;

  const double radius = cfg.constraint_radius;
  const double q = cfg.q;
  MlpParams params = MlpParams::random_init(
      layer_dims(arch, static_cast<std::size_t>(X.cols()), static_cast<std::size_t>(Y.cols())),
      arch.activation, q, arch.bias, cfg.enforce_constraint ? radius : -1.0, init_rng);

  FitReport report;
  report.lambda_used = lambda;

  std::optional<MlpParams> best;
  double best_val = std::numeric_limits<double>::infinity();
  if (use_val) {
    best_val = mse_loss(params, X_val, Y_val);
    best = params;
  }

  const bool full_batch = cfg.batch_size >= n_tr;
  const std::size_t L = params.depth();
  double lr = cfg.learning_rate;
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffle_rng.permutation(n_tr);
    for (std::size_t start = 0; start < n_tr; start += cfg.batch_size) {
      LossGrad lg;
      if (full_batch) {
        lg = loss_and_grad(params, X_tr, Y_tr);
      } else {
        const auto idx = slice(order, start, std::min(n_tr, start + cfg.batch_size));
        lg = loss_and_grad(params, gather_rows(X_tr, idx), gather_rows(Y_tr, idx));
      }
      for (std::size_t l = 0; l <= L; ++l) params.layer(l) -= lr * lg.grads[l];
      if (lambda > 0.0) params.layer(L) = prox_lq_power(params.layer(L), q, lr * lambda);
      if (cfg.enforce_constraint) {
        for (std::size_t l = 0; l <= L; ++l) params.layer(l) = project_lq_ball(params.layer(l), q, radius);
      }
      if (full_batch) break;
    }

    const double obj = penalized_objective(params, X_tr, Y_tr, lambda);
    if (!std::isfinite(obj) || obj > kDivergence) {
      throw_numeric("fit: objective diverged at epoch " + std::to_string(epoch + 1) + " (" +
                    std::to_string(obj) + ")");
    }
    report.objective_trace.push_back(obj);
    report.epochs_run = epoch + 1;
    lr *= cfg.lr_decay;

    if (use_val) {
      const double v = mse_loss(params, X_val, Y_val);
      if (v < best_val - cfg.tol) {
        best_val = v;
        best = params;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
  }

  if (use_val) {
    params = std::move(*best);
    report.best_val_loss = best_val;
    report.final_objective = penalized_objective(params, X_tr, Y_tr, lambda);
  } else {
    report.final_objective = report.objective_trace.back();
  }
  return {std::move(params), std::move(report)};
}

FitResult fit_with_rate(const Matrix& X, const Matrix& Y, const Architecture& arch,
                        const TrainConfig& cfg, const RateInputs& rate,
                        std::optional<std::size_t> val_pool) {
  cfg.validate();
  if (const auto* fixed = std::get_if<FixedLambda>(&cfg.lambda_mode)) {
    return fit_penalized(X, Y, arch, cfg, fixed->lambda, val_pool);
  }
  const std::size_t L = rate_depth(arch);
  if (!cfg.select_c || cfg.val_fraction <= 0.0) {
    const double c = std::get<TheoryRate>(cfg.lambda_mode).c;
    return fit_penalized(X, Y, arch, cfg, lambda_rate(rate.v, L, rate.log_arg, rate.n, c), val_pool);
  }
  std::optional<FitResult> best;
  double best_c = 0.0;
  for (double c : cfg.c_grid) {
    FitResult r = fit_penalized(X, Y, arch, cfg, lambda_rate(rate.v, L, rate.log_arg, rate.n, c), val_pool);
    const double val = r.report.best_val_loss.value_or(std::numeric_limits<double>::infinity());
    if (!best || val < *best->report.best_val_loss) {
      best = std::move(r);
      best_c = c;
    }
  }
  best->report.selected_c = best_c;
  return std::move(*best);
}

FitResult fit_penalized(const Matrix& X, const Matrix& Y, const Architecture& arch,
                        const TrainConfig& cfg) {
  const auto p_total = p_total_for(arch, static_cast<std::size_t>(X.cols()), static_cast<std::size_t>(Y.cols()));
  if (X.rows() == 0) throw_domain("fit: empty training set");
  return fit_with_rate(X, Y, arch, cfg, baseline_rate_inputs(X, static_cast<std::size_t>(Y.cols()), p_total));
}

AlignmentModel fit_baseline(const PairedDataset& data, const Architecture& arch,
                            const TrainConfig& cfg) {
  data.validate();
  if (data.n() == 0) throw_domain("fit_baseline: empty dataset");
  FitResult r = fit_penalized(data.X, data.Y, arch, cfg);
  return {std::move(r.params), std::move(r.report), "baseline"};
}

TrainConfig step_config(const TrainConfig& cfg, std::uint64_t step) {
  TrainConfig out = cfg;
  out.seed = mix_seed(cfg.seed, step);
  return out;
}

}  // namespace embalign
