#include "embalign/mtl.hpp"

#include "embalign/error.hpp"
#include "embalign/io/mdl1.hpp"
#include "embalign/kernels.hpp"
#include "embalign/lq.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace embalign {
namespace {

double soft_threshold(double a, double t) {
  if (a > t) return a - t;
  if (a < -t) return a + t;
  return 0.0;
}

std::size_t checked_cols(const Matrix& M) { return static_cast<std::size_t>(M.cols()); }

}  // namespace

void SourceBank::validate(std::size_t d, std::size_t m) const {
  if (models.empty()) throw_shape("source bank is empty");
  if (labels.size() != models.size()) {
    throw_shape("source bank has " + std::to_string(models.size()) + " models but " +
                std::to_string(labels.size()) + " labels");
  }
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k].input_dim() != d || models[k].output_dim() != m) {
      throw_shape("source " + labels[k] + " maps " + std::to_string(models[k].input_dim()) + " -> " +
                  std::to_string(models[k].output_dim()) + ", target is " + std::to_string(d) +
                  " -> " + std::to_string(m));
    }
  }
}

std::uint64_t SourceBank::digest() const {
  std::uint64_t h = io::kFnvOffset;
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (k < labels.size()) h = io::fnv1a(labels[k], h);
    h = io::fnv1a(std::string_view("\0", 1), h);
    h = io::fnv1a(io::encode_model(models[k]), h);
  }
  return h;
}

std::vector<Matrix> source_predictions(const SourceBank& bank, const Matrix& X) {
  if (bank.models.empty()) throw_shape("source bank is empty");
  for (const auto& model : bank.models) {
    if (checked_cols(X) != model.input_dim()) {
      throw_shape("source predictions: X has " + std::to_string(X.cols()) +
                  " columns, sources expect " + std::to_string(model.input_dim()));
    }
    if (model.output_dim() != bank.models.front().output_dim()) {
      throw_shape("source predictions: sources disagree on the output width");
    }
  }
  return kernels::parallel::source_predictions(bank.models, X);
}

Matrix aggregate(const std::vector<Matrix>& F, const Vector& gamma) {
  if (F.empty()) throw_shape("aggregate: no sources");
  if (static_cast<std::size_t>(gamma.size()) != F.size()) {
    throw_shape("aggregate: gamma has " + std::to_string(gamma.size()) + " entries for " +
                std::to_string(F.size()) + " sources");
  }
  Matrix out = Matrix::Zero(F.front().rows(), F.front().cols());
  for (std::size_t k = 0; k < F.size(); ++k) out += gamma[static_cast<Eigen::Index>(k)] * F[k];
  return out;
}

SourceGram source_gram(const std::vector<Matrix>& F, const Matrix& Y) {
  const auto K = static_cast<Eigen::Index>(F.size());
  SourceGram g;
  g.n = static_cast<std::size_t>(Y.rows());
  if (g.n == 0) throw_domain("source gram: n must be >= 1");
  g.G.resize(K, K);
  g.c.resize(K);
  const double inv_n = 1.0 / static_cast<double>(g.n);
  for (Eigen::Index j = 0; j < K; ++j) {
    const auto& Fj = F[static_cast<std::size_t>(j)];
    if (Fj.rows() != Y.rows() || Fj.cols() != Y.cols()) throw_shape("source gram: shape mismatch");
    g.c[j] = inv_n * Fj.cwiseProduct(Y).sum();
    for (Eigen::Index k = 0; k <= j; ++k) {
      const double v = inv_n * Fj.cwiseProduct(F[static_cast<std::size_t>(k)]).sum();
      g.G(j, k) = v;
      g.G(k, j) = v;
    }
  }
  return g;
}

SigmaEstimate estimate_sigma(const PairedDataset& data, const SourceBank& bank) {
  data.validate();
  bank.validate(data.d(), data.m());
  const std::size_t K = bank.K();
  if (data.n() <= K) {
    throw_domain("estimate_sigma: need n > K, have n = " + std::to_string(data.n()) +
                 ", K = " + std::to_string(K));
  }
  const auto F = source_predictions(bank, data.X);
  const SourceGram g = source_gram(F, data.Y);

  SigmaEstimate est;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.G);
  const double top = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 0.0);
  Vector gamma;
  if (top > 0.0 && eig.eigenvalues().minCoeff() > 1e-12 * top) {
    gamma = Eigen::MatrixXd(g.G).ldlt().solve(g.c);
  } else {
    est.ridge_fallback = true;
    const double ridge = 1e-8 * std::max(top, 1e-300);
    Eigen::MatrixXd reg = g.G;
    reg.diagonal().array() += ridge;
    gamma = reg.ldlt().solve(g.c);
  }
  const Matrix R = data.Y - aggregate(F, gamma);
  const double dof = static_cast<double>(data.m()) * static_cast<double>(data.n() - K);
  est.sigma = std::sqrt(R.squaredNorm() / dof);
  return est;
}

LassoResult fit_weights_lasso(const SourceGram& gram, double lambda, double tol,
                              std::size_t max_sweeps) {
  if (!(std::isfinite(lambda) && lambda >= 0.0)) throw_domain("lasso: lambda must be finite and >= 0");
  if (!(tol > 0.0)) throw_domain("lasso: tol must be > 0");
  const Eigen::Index K = gram.G.rows();
  const double half = 0.5 * lambda;
  LassoResult out;
  out.gamma = Vector::Zero(K);
  std::vector<bool> dead(static_cast<std::size_t>(K), false);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (!(gram.G(k, k) > 0.0)) {
      dead[static_cast<std::size_t>(k)] = true;
      out.degenerate.push_back(static_cast<std::size_t>(k));
    }
  }

  auto partial = [&](Eigen::Index k) {
    // a_k = c_k - sum_{j != k} G_kj gamma_j
    double s = gram.c[k];
    for (Eigen::Index j = 0; j < K; ++j) {
      if (j != k) s -= gram.G(k, j) * out.gamma[j];
    }
    return s;
  };

  for (out.sweeps = 0; out.sweeps < max_sweeps;) {
    ++out.sweeps;
    double max_change = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      if (dead[static_cast<std::size_t>(k)]) continue;
      const double next = soft_threshold(partial(k), half) / gram.G(k, k);
      max_change = std::max(max_change, std::abs(next - out.gamma[k]));
      out.gamma[k] = next;
    }
    if (max_change <= tol) {
      out.converged = true;
      break;
    }
  }

  double row_scale = 0.0;
  for (Eigen::Index k = 0; k < K; ++k) row_scale = std::max(row_scale, gram.G.row(k).cwiseAbs().sum());
  out.kkt_tol = tol * std::max(row_scale, 1.0);
  for (Eigen::Index k = 0; k < K; ++k) {
    if (dead[static_cast<std::size_t>(k)]) continue;
    const double a = partial(k);
    const double g = out.gamma[k];
    const double viol = g == 0.0 ? std::max(0.0, std::abs(a) - half)
                                 : std::abs(a - gram.G(k, k) * g - (g > 0 ? half : -half));
    out.kkt_violation = std::max(out.kkt_violation, viol);
  }
  out.kkt_ok = out.kkt_violation <= out.kkt_tol;
  return out;
}

LassoResult fit_weights_lasso(const PairedDataset& data, const SourceBank& bank, double lambda,
                              double tol, std::size_t max_sweeps) {
  data.validate();
  bank.validate(data.d(), data.m());
  if (data.n() == 0) throw_domain("lasso: n must be >= 1");
  return fit_weights_lasso(source_gram(source_predictions(bank, data.X), data.Y), lambda, tol,
                           max_sweeps);
}

double lambda_wts(double sigma_hat, std::size_t K, std::size_t n, double c) {
  if (K < 1 || n < 1) throw_domain("lambda_wts: K and n must be >= 1");
  if (!(std::isfinite(sigma_hat) && sigma_hat >= 0.0)) throw_domain("lambda_wts: sigma_hat must be >= 0");
  if (!(std::isfinite(c) && c > 0.0)) throw_domain("lambda_wts: c must be > 0");
  const double lk = std::max(std::log(static_cast<double>(K)), 1.0);
  return c * sigma_hat * std::sqrt(lk / static_cast<double>(n));
}

FitResult fit_residual_mtl(const PairedDataset& data, const SourceBank& bank, const Vector& gamma,
                           const Architecture& arch, const TrainConfig& cfg) {
  data.validate();
  bank.validate(data.d(), data.m());
  if (data.n() < 2) throw_domain("fit_residual_mtl: need n >= 2");
  const Matrix R = data.Y - aggregate(source_predictions(bank, data.X), gamma);
  const auto p_total = p_total_for(arch, data.d(), data.m());
  const RateInputs rate{v_infty(data.X),
                        static_cast<double>(data.n()) * static_cast<double>(data.m()) *
                            static_cast<double>(p_total),
                        data.n()};
  return fit_with_rate(data.X, R, arch, cfg, rate);
}

MtlModel fit_mtl(const PairedDataset& data, const SourceBank& bank, const Architecture& arch,
                 const TrainConfig& cfg, const MtlOptions& opts) {
  data.validate();
  if (data.n() == 0) throw_domain("fit_mtl: empty paired data");
  bank.validate(data.d(), data.m());

  auto step = [](int index, const char* name, auto&& body) {
    try {
      return body();
    } catch (const Error& e) {
      throw Error(e.kind(), "mtl step " + std::to_string(index) + " (" + name + "): " + e.what());
    }
  };

  MtlModel model{Vector(), MlpParams::zeros({data.d(), data.m()}, arch.activation, cfg.q), 0, 0.0,
                 0.0, 0.0, false, {}, {}};
  model.bank_digest = bank.digest();

  const SigmaEstimate sigma = step(1, "sigma", [&] { return estimate_sigma(data, bank); });
  model.sigma_hat = sigma.sigma;
  model.sigma_ridge_fallback = sigma.ridge_fallback;

  model.lasso = step(1, "weights", [&] {
    const SourceGram gram = source_gram(source_predictions(bank, data.X), data.Y);
    double c = opts.wts_c;
    if (opts.scale_by_source_energy) c *= std::sqrt(std::max(gram.G.diagonal().maxCoeff(), 0.0));
    model.lambda_wts = c > 0.0 ? lambda_wts(sigma.sigma, bank.K(), data.n(), c) : 0.0;
    return fit_weights_lasso(gram, model.lambda_wts, opts.lasso_tol, opts.max_sweeps);
  });
  model.gamma = model.lasso.gamma;

  FitResult res = step(2, "residual", [&] {
    return fit_residual_mtl(data, bank, model.gamma, arch, step_config(cfg, 2));
  });
  model.residual = std::move(res.params);
  model.lambda_res = res.report.lambda_used;
  model.residual_report = std::move(res.report);
  return model;
}

Matrix predict_mtl(const MtlModel& model, const SourceBank& bank, const Matrix& X) {
  if (bank.digest() != model.bank_digest) {
    throw Error(ErrorKind::Integrity, "predict_mtl: source bank digest does not match the fitted model");
  }
  Matrix out = forward_batch(model.residual, X);
  out += aggregate(source_predictions(bank, X), model.gamma);
  return out;
}

double restricted_eigen_diag(const SourceBank& bank, const Matrix& X,
                             const std::vector<std::size_t>& support) {
  if (support.empty()) throw_domain("restricted_eigen_diag: empty support");
  if (X.rows() == 0) throw_domain("restricted_eigen_diag: n must be >= 1");
  const auto F = source_predictions(bank, X);
  const auto s = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd G(s, s);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  for (Eigen::Index a = 0; a < s; ++a) {
    const std::size_t ka = support[static_cast<std::size_t>(a)];
    if (ka >= F.size()) throw_domain("restricted_eigen_diag: support index out of range");
    for (Eigen::Index b = 0; b <= a; ++b) {
      const double v = inv_n * F[ka].cwiseProduct(F[support[static_cast<std::size_t>(b)]]).sum();
      G(a, b) = v;
      G(b, a) = v;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace embalign
