#include "embalign/synth.hpp"

#include "embalign/error.hpp"
#include "embalign/lq.hpp"
#include "embalign/rng.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <string>

namespace embalign {
namespace {

constexpr std::uint64_t kTruthStream = 1;
constexpr std::uint64_t kPairedStream = 2;
constexpr std::uint64_t kUnpairedStream = 3;
constexpr std::uint64_t kTestStream = 4;
constexpr std::uint64_t kAuxStream = 6;
constexpr std::uint64_t kOracleStream = 0x4D43;
constexpr std::size_t kAuxDraws = 4096;

Matrix normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix Z(rows, cols);
  for (Eigen::Index i = 0; i < Z.size(); ++i) Z.data()[i] = rng.normal();
  return Z;
}

Matrix noisy(const Matrix& clean, double sigma, Rng& rng) {
  if (sigma == 0.0) return clean;
  return clean + sigma * normal_matrix(static_cast<std::size_t>(clean.rows()),
                                       static_cast<std::size_t>(clean.cols()), rng);
}

McEstimate row_mean_se(const Vector& v) {
  McEstimate e;
  const auto n = static_cast<double>(v.size());
  e.value = v.mean();
  if (v.size() > 1) {
    const double var = (v.array() - e.value).square().sum() / (n - 1.0);
    e.se = std::sqrt(var / n);
  }
  return e;
}

}  // namespace

void WorldSpec::validate() const {
  if (d < 1 || m < 1) throw_domain("world: d and m must be >= 1");
  if (!(std::isfinite(sigma) && sigma >= 0.0)) throw_domain("world: sigma must be finite and >= 0");
  if (const auto* lin = std::get_if<LinearGaussian>(&truth)) {
    if (static_cast<std::size_t>(lin->A.rows()) != m || static_cast<std::size_t>(lin->A.cols()) != d) {
      throw_domain("world: A must be m x d");
    }
    if (static_cast<std::size_t>(lin->sigma_x.rows()) != d ||
        static_cast<std::size_t>(lin->sigma_x.cols()) != d) {
      throw_domain("world: sigma_x must be d x d");
    }
    if (!lin->A.allFinite() || !lin->sigma_x.allFinite()) throw_domain("world: non-finite covariance or A");
    if (!lin->sigma_x.isApprox(lin->sigma_x.transpose(), 1e-12)) throw_domain("world: sigma_x is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(Eigen::MatrixXd(lin->sigma_x));
    if (llt.info() != Eigen::Success) throw_domain("world: sigma_x is not positive definite");
  } else {
    const auto& mt = std::get<MlpTruth>(truth);
    if (!(mt.q >= 1.0 && mt.q <= 2.0)) throw_domain("world: truth q must lie in [1, 2]");
    if (!(std::isfinite(mt.input_scale) && mt.input_scale > 0.0)) {
      throw_domain("world: input_scale must be > 0");
    }
  }
  if (const auto* adv = std::get_if<Adversarial>(&unpaired)) {
    if (!(std::isfinite(adv->shift_scale) && adv->shift_scale >= 0.0)) {
      throw_domain("world: adversarial shift_scale must be >= 0");
    }
  }
  if (subjects) {
    if (!std::holds_alternative<MlpTruth>(truth)) {
      throw_domain("world: multi-subject worlds need an MLP truth architecture for the sources");
    }
    const auto& s = *subjects;
    if (s.K < 1) throw_domain("world: K must be >= 1");
    if (s.s_star > s.K) throw_domain("world: s_star exceeds K");
    if (!(std::isfinite(s.residual_scale) && s.residual_scale >= 0.0)) {
      throw_domain("world: residual_scale must be >= 0");
    }
    if (s.gamma_star.size() > 0) {
      if (static_cast<std::size_t>(s.gamma_star.size()) != s.K) throw_domain("world: gamma_star must have K entries");
      if (!s.gamma_star.allFinite()) throw_domain("world: gamma_star must be finite");
      const auto nnz = static_cast<std::size_t>((s.gamma_star.array() != 0.0).count());
      if (nnz != s.s_star) {
        throw_domain("world: gamma_star has " + std::to_string(nnz) + " nonzeros, s_star is " +
                     std::to_string(s.s_star));
      }
    }
  }
}

Matrix GroundTruth::evaluate(const Matrix& X) const {
  if (A) {
    if (X.cols() != A->cols()) throw_shape("ground truth: X has the wrong column count");
    return X * A->transpose();
  }
  if (nets.empty()) throw_shape("ground truth is empty");
  Matrix out = Matrix::Zero(X.rows(), static_cast<Eigen::Index>(nets.front().output_dim()));
  for (std::size_t k = 0; k < nets.size(); ++k) {
    out += weights[static_cast<Eigen::Index>(k)] * forward_batch(nets[k], X);
  }
  return out;
}

Matrix sample_predictors(const WorldSpec& spec, std::size_t count, Rng& rng) {
  if (const auto* lin = std::get_if<LinearGaussian>(&spec.truth)) {
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(Eigen::MatrixXd(lin->sigma_x)).matrixL();
    return normal_matrix(count, spec.d, rng) * L.transpose();
  }
  const double s = std::get<MlpTruth>(spec.truth).input_scale;
  Matrix X(count, spec.d);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-s, s);
  return X;
}

MlpParams random_feasible_net(const std::vector<std::size_t>& dims, const Architecture& arch,
                              double q, Rng& rng) {
  MlpParams p = MlpParams::zeros(dims, arch.activation, q, arch.bias);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    Matrix& w = p.layer(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);
    w = project_lq_ball(w, q, 1.0);
  }
  return p;
}

LinearGaussian random_linear_gaussian(std::size_t d, std::size_t m, double a_norm,
                                      double signal_scale, double nuisance_scale, Rng& rng) {
  if (!(a_norm > 0.0 && signal_scale > 0.0 && nuisance_scale > 0.0)) {
    throw_domain("random_linear_gaussian: scales must be > 0");
  }
  Matrix A = normal_matrix(m, d, rng);
  A *= a_norm / A.norm();
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  if (m < d) {
    const Eigen::MatrixXd Ad = A;
    P = Ad.transpose() * (Ad * Ad.transpose()).ldlt().solve(Ad);
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(P.rows(), P.cols());
  Eigen::MatrixXd S = signal_scale * signal_scale * P + nuisance_scale * nuisance_scale * (I - P);
  S = 0.5 * (S + S.transpose()).eval();
  return {A, Matrix(S)};
}

SourceWorld make_source_bank(const WorldSpec& spec) {
  spec.validate();
  if (!spec.subjects) throw_domain("make_source_bank: world has no subjects");
  const auto& subj = *spec.subjects;
  const auto& mt = std::get<MlpTruth>(spec.truth);
  const auto dims = layer_dims(mt.arch, spec.d, spec.m);
  Rng rng = Rng(spec.seed).split(kTruthStream);

  SourceWorld out;
  for (std::size_t k = 0; k < subj.K; ++k) {
    out.bank.models.push_back(random_feasible_net(dims, mt.arch, mt.q, rng));
    out.bank.labels.push_back("source_" + std::to_string(k));
  }
  MlpParams f_res = random_feasible_net(dims, mt.arch, mt.q, rng);

  Vector gamma = subj.gamma_star;
  if (gamma.size() == 0) {
    gamma = Vector::Zero(static_cast<Eigen::Index>(subj.K));
    auto perm = rng.permutation(subj.K);
    for (std::size_t j = 0; j < subj.s_star; ++j) {
      const double mag = 0.5 + rng.uniform();
      gamma[static_cast<Eigen::Index>(perm[j])] = rng.uniform() < 0.5 ? -mag : mag;
    }
  }
  for (Eigen::Index k = 0; k < gamma.size(); ++k) {
    if (gamma[k] != 0.0) out.record.support.push_back(static_cast<std::size_t>(k));
  }
  out.record.gamma_star = gamma;

  out.truth.nets = out.bank.models;
  out.truth.nets.push_back(f_res);
  out.truth.weights.resize(static_cast<Eigen::Index>(subj.K + 1));
  out.truth.weights.head(static_cast<Eigen::Index>(subj.K)) = gamma;
  out.truth.weights[static_cast<Eigen::Index>(subj.K)] = subj.residual_scale;

  Rng aux = Rng(spec.seed).split(kAuxStream);
  const Matrix X = sample_predictors(spec, kAuxDraws, aux);
  const Matrix r = subj.residual_scale * forward_batch(f_res, X);
  out.record.c_aux = r.rowwise().squaredNorm().mean();
  return out;
}

GeneratedWorld generate(const WorldSpec& spec, std::size_t n, std::size_t N, std::size_t n_test) {
  spec.validate();
  const Rng root(spec.seed);
  GeneratedWorld w;
  w.spec = spec;

  if (spec.subjects) {
    SourceWorld sw = make_source_bank(spec);
    w.truth = std::move(sw.truth);
    w.bank = std::move(sw.bank);
    w.subjects = std::move(sw.record);
  } else if (const auto* lin = std::get_if<LinearGaussian>(&spec.truth)) {
    w.truth.A = lin->A;
  } else {
    const auto& mt = std::get<MlpTruth>(spec.truth);
    Rng truth_rng = root.split(kTruthStream);
    w.truth.nets.push_back(random_feasible_net(layer_dims(mt.arch, spec.d, spec.m), mt.arch, mt.q, truth_rng));
    w.truth.weights = Vector::Ones(1);
  }

  Rng paired = root.split(kPairedStream);
  w.paired.X = sample_predictors(spec, n, paired);
  w.paired.Y = noisy(w.truth.evaluate(w.paired.X), spec.sigma, paired);

  Rng unpaired = root.split(kUnpairedStream);
  if (std::holds_alternative<Informative>(spec.unpaired)) {
    const Matrix Xu = sample_predictors(spec, N, unpaired);
    w.unpaired.Y = noisy(w.truth.evaluate(Xu), spec.sigma, unpaired);
  } else {
    const double shift = std::get<Adversarial>(spec.unpaired).shift_scale * spec.sigma;
    // Spread per coordinate: the truth's RMS scaled by a random factor in [0.5, 2].
    Rng pilot = unpaired.split(1);
    const Matrix F = w.truth.evaluate(sample_predictors(spec, 512, pilot));
    Vector spread(static_cast<Eigen::Index>(spec.m));
    for (Eigen::Index j = 0; j < spread.size(); ++j) {
      const double rms = std::sqrt(F.col(j).squaredNorm() / static_cast<double>(F.rows()));
      spread[j] = std::max(rms, spec.sigma) * (0.5 + 1.5 * unpaired.uniform());
    }
    w.unpaired.Y.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(spec.m));
    for (Eigen::Index i = 0; i < w.unpaired.Y.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.unpaired.Y.cols(); ++j) {
        w.unpaired.Y(i, j) = shift + spread[j] * unpaired.normal();
      }
    }
  }

  Rng test = root.split(kTestStream);
  w.test.X = sample_predictors(spec, n_test, test);
  w.test_clean = w.truth.evaluate(w.test.X);
  w.test.Y = noisy(w.test_clean, spec.sigma, test);
  return w;
}

McEstimate oracle_mse(const PredictFn& f_hat, const GeneratedWorld& world, std::size_t n_mc,
                      std::uint64_t stream) {
  if (n_mc < 1) throw_domain("oracle_mse: n_mc must be >= 1");
  Rng rng = Rng(world.spec.seed).split(kOracleStream).split(stream);
  const Matrix X = sample_predictors(world.spec, n_mc, rng);
  const Matrix diff = f_hat(X) - world.truth.evaluate(X);
  return row_mean_se(diff.rowwise().squaredNorm());
}

Matrix inverse_oracle(const GeneratedWorld& world) {
  const auto* lin = std::get_if<LinearGaussian>(&world.spec.truth);
  if (!lin || world.spec.subjects) {
    throw_domain("inverse_oracle: closed form exists only for linear-Gaussian worlds");
  }
  const Eigen::MatrixXd A = lin->A;
  const Eigen::MatrixXd Sx = lin->sigma_x;
  Eigen::MatrixXd Syy = A * Sx * A.transpose();
  Syy.diagonal().array() += world.spec.sigma * world.spec.sigma;
  const Eigen::MatrixXd Sxy = Sx * A.transpose();
  // G = Sxy Syy^{-1}, Syy symmetric.
  const Eigen::MatrixXd Gt = Syy.ldlt().solve(Sxy.transpose());
  return Matrix(Gt.transpose());
}

McEstimate inverse_error(const PredictFn& g_hat, const GeneratedWorld& world, std::size_t n_mc,
                         std::uint64_t stream) {
  if (n_mc < 1) throw_domain("inverse_error: n_mc must be >= 1");
  const Matrix G = inverse_oracle(world);
  Rng rng = Rng(world.spec.seed).split(kOracleStream + 1).split(stream);
  const Matrix X = sample_predictors(world.spec, n_mc, rng);
  const Matrix Y = noisy(world.truth.evaluate(X), world.spec.sigma, rng);
  const Matrix diff = g_hat(Y) - Y * G.transpose();
  return row_mean_se(diff.rowwise().squaredNorm());
}

}  // namespace embalign
