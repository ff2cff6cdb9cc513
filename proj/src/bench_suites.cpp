#include "embalign/bench_suites.hpp"

#include "embalign/error.hpp"
#include "embalign/gradient.hpp"
#include "embalign/isl.hpp"
#include "embalign/lq.hpp"
#include "embalign/metrics.hpp"
#include "embalign/mtl.hpp"
#include "embalign/rng.hpp"
#include "embalign/synth.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace embalign::bench {
namespace {

using io::Json;

constexpr std::size_t kBootstrapReps = 1000;

struct Replication {
  Json line;
  std::vector<double> values;
};

using RepFn = std::function<Replication(std::size_t rep, std::uint64_t seed)>;

std::vector<Replication> replicate(const std::string& suite, const SuiteOptions& opts,
                                   std::size_t count, const RepFn& fn) {
  std::vector<Replication> out(count);
  std::vector<std::string> errors(count);
  const int jobs = static_cast<int>(std::max<std::size_t>(opts.jobs, 1));
#pragma omp parallel for num_threads(jobs) schedule(dynamic, 1) if (jobs > 1)
  for (std::size_t r = 0; r < count; ++r) {
    try {
      const std::uint64_t seed = replication_seed(opts.master_seed, r);
      out[r] = fn(r, seed);
      Json head{{"suite", suite}, {"rep", r}, {"seed", seed}};
      head.update(out[r].line);
      out[r].line = std::move(head);
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  }
  for (std::size_t r = 0; r < count; ++r) {
    if (!errors[r].empty()) {
      throw Error(ErrorKind::Numeric, suite + " replication " + std::to_string(r) + ": " + errors[r]);
    }
  }
  return out;
}

std::vector<double> column(const std::vector<Replication>& reps, std::size_t i) {
  std::vector<double> v;
  for (const auto& r : reps) v.push_back(r.values.at(i));
  return v;
}

SuiteResult finish(std::vector<Replication> reps, Json summary, bool pass) {
  SuiteResult res;
  for (auto& r : reps) res.lines.push_back(std::move(r.line));
  summary["verdict"] = pass ? "pass" : "fail";
  res.summary = std::move(summary);
  res.pass = pass;
  return res;
}

Json clip_metrics(const Matrix& pred, const Matrix& truth) {
  return Json{{"clip_distance", clip_distance(pred, truth)},
              {"clip_correlation", clip_correlation(pred, truth)}};
}

double test_mse(const Matrix& pred, const GeneratedWorld& w) { return mean_sq_error(pred, w.test.Y); }

// ---- worlds and training settings shared by the statistical suites ----

WorldSpec mlp_world(std::uint64_t seed) {
  WorldSpec spec;
  spec.d = 32;
  spec.m = 16;
  spec.sigma = 0.1;
  MlpTruth truth;
  truth.arch.hidden = {32};
  truth.input_scale = 10.0;
  spec.truth = truth;
  spec.seed = seed;
  return spec;
}

TrainConfig mlp_train(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.lambda_mode = TheoryRate{0.1};
  cfg.epochs = 300;
  cfg.learning_rate = 0.05;
  cfg.lr_decay = 0.98;
  cfg.patience = 30;
  cfg.batch_size = 32;
  cfg.seed = seed;
  return cfg;
}

Architecture hidden_arch(std::vector<std::size_t> hidden) {
  Architecture a;
  a.hidden = std::move(hidden);
  return a;
}

WorldSpec linear_world(std::uint64_t seed) {
  WorldSpec spec;
  spec.d = 32;
  spec.m = 16;
  spec.sigma = 1.0;
  Rng rng = Rng(seed).split(99);
  spec.truth = random_linear_gaussian(32, 16, 4.0, 10.0, 1.0, rng);
  spec.seed = seed;
  return spec;
}

TrainConfig linear_train(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.lambda_mode = TheoryRate{0.1};
  cfg.epochs = 200;
  cfg.learning_rate = 5e-4;
  cfg.patience = 20;
  cfg.constraint_radius = 50.0;
  cfg.batch_size = 32;
  cfg.seed = seed;
  return cfg;
}

// ---- suites ----

SuiteResult safety_isl(const SuiteOptions& opts) {
  const std::size_t count = opts.seeds ? opts.seeds : 20;
  auto reps = replicate("safety-isl", opts, count, [](std::size_t, std::uint64_t seed) {
    WorldSpec spec = mlp_world(seed);
    spec.unpaired = Adversarial{3.0};
    const GeneratedWorld w = generate(spec, 1000, 10000, 2000);
    const TrainConfig cfg = mlp_train(mix_seed(seed, 1));
    const Architecture arch = hidden_arch({64});
    const auto base = fit_baseline(w.paired, arch, cfg);
    const Matrix pb = forward_batch(base.params, w.test.X);
    const auto isl = fit_isl(w.paired, w.unpaired, {hidden_arch({64, 32}), arch, arch}, cfg);
    const Matrix pi = predict_isl(isl, w.test.X);
    const double mb = test_mse(pb, w);
    const double mi = test_mse(pi, w);
    return Replication{Json{{"method", "isl"},
                            {"test_mse", mi},
                            {"baseline_test_mse", mb},
                            {"metrics", clip_metrics(pi, w.test.Y)},
                            {"baseline_metrics", clip_metrics(pb, w.test.Y)}},
                       {mb, mi}};
  });
  const double mb = median(column(reps, 0));
  const double mi = median(column(reps, 1));
  const double ratio = mi / mb;
  Json s{{"suite", "safety-isl"}, {"replications", count}, {"master_seed", opts.master_seed},
         {"median_baseline_test_mse", mb}, {"median_isl_test_mse", mi}, {"ratio", ratio},
         {"threshold", 1.05}};
  return finish(std::move(reps), std::move(s), ratio <= 1.05);
}

SuiteResult enhance_isl(const SuiteOptions& opts) {
  const std::size_t count = opts.seeds ? opts.seeds : 20;
  auto reps = replicate("enhance-isl", opts, count, [](std::size_t, std::uint64_t seed) {
    const GeneratedWorld w = generate(linear_world(seed), 500, 5000, 2000);
    const TrainConfig cfg = linear_train(mix_seed(seed, 1));
    const Architecture arch = hidden_arch({});
    const auto base = fit_baseline(w.paired, arch, cfg);
    const Matrix pb = forward_batch(base.params, w.test.X);
    const auto isl = fit_isl(w.paired, w.unpaired, {arch, arch, arch}, cfg);
    const Matrix pi = predict_isl(isl, w.test.X);
    const double mb = test_mse(pb, w);
    const double mi = test_mse(pi, w);
    return Replication{Json{{"method", "isl"},
                            {"test_mse", mi},
                            {"baseline_test_mse", mb},
                            {"metrics", clip_metrics(pi, w.test.Y)},
                            {"baseline_metrics", clip_metrics(pb, w.test.Y)}},
                       {mb, mi, mi < mb ? 1.0 : 0.0}};
  });
  const double mb = median(column(reps, 0));
  const double mi = median(column(reps, 1));
  const auto wins = column(reps, 2);
  const double win_rate = std::accumulate(wins.begin(), wins.end(), 0.0) / static_cast<double>(count);
  const double improvement = 1.0 - mi / mb;
  Json s{{"suite", "enhance-isl"}, {"replications", count}, {"master_seed", opts.master_seed},
         {"median_baseline_test_mse", mb}, {"median_isl_test_mse", mi},
         {"win_rate", win_rate}, {"median_improvement", improvement}};
  return finish(std::move(reps), std::move(s), win_rate >= 0.9 && improvement >= 0.05);
}

SuiteResult unpaired_size(const SuiteOptions& opts) {
  const std::size_t count = opts.seeds ? opts.seeds : 20;
  constexpr std::size_t n = 500;
  const std::vector<std::size_t> sizes = {0, n, 10 * n};
  auto reps = replicate("unpaired-size", opts, count, [&](std::size_t, std::uint64_t seed) {
    const GeneratedWorld w = generate(linear_world(seed), n, sizes.back(), 2000);
    const TrainConfig cfg = linear_train(mix_seed(seed, 1));
    const Architecture arch = hidden_arch({});
    Replication rep;
    Json by_size = Json::object();
    for (std::size_t N : sizes) {
      const UnpairedResponses Yu{w.unpaired.Y.topRows(static_cast<Eigen::Index>(N))};
      const auto isl = fit_isl(w.paired, Yu, {arch, arch, arch}, cfg);
      const double mse = test_mse(predict_isl(isl, w.test.X), w);
      by_size[std::to_string(N)] = mse;
      rep.values.push_back(mse);
    }
    rep.line = Json{{"method", "isl"}, {"test_mse", rep.values.back()}, {"test_mse_by_N", by_size}};
    return rep;
  });
  Json medians = Json::object();
  Json ses = Json::object();
  std::vector<double> med, se;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const auto v = column(reps, i);
    med.push_back(median(v));
    se.push_back(bootstrap_median_se(v, kBootstrapReps, mix_seed(opts.master_seed, 0xB5 + i)));
    medians[std::to_string(sizes[i])] = med.back();
    ses[std::to_string(sizes[i])] = se.back();
  }
  bool pass = true;
  for (std::size_t i = 1; i < sizes.size(); ++i) pass = pass && med[i] <= med[i - 1] + se[i];
  Json s{{"suite", "unpaired-size"}, {"replications", count}, {"master_seed", opts.master_seed},
         {"n", n}, {"median_test_mse_by_N", medians}, {"bootstrap_se_by_N", ses}};
  return finish(std::move(reps), std::move(s), pass);
}

WorldSpec subject_world(std::uint64_t seed, std::size_t m, std::size_t K, double delta) {
  WorldSpec spec = mlp_world(seed);
  spec.m = m;
  MultiSubjectSpec ms;
  ms.K = K;
  ms.s_star = 2;
  ms.residual_scale = delta;
  spec.subjects = ms;
  return spec;
}

SuiteResult mtl_efficiency(const SuiteOptions& opts) {
  const std::size_t count = opts.seeds ? opts.seeds : 20;
  auto reps = replicate("mtl-efficiency", opts, count, [](std::size_t, std::uint64_t seed) {
    const GeneratedWorld w = generate(subject_world(seed, 16, 8, 0.1), 1000, 0, 2000);
    const TrainConfig cfg = mlp_train(mix_seed(seed, 1));
    const Architecture arch = hidden_arch({64});
    const auto base = fit_baseline(w.paired, arch, cfg);
    const Matrix pb = forward_batch(base.params, w.test.X);
    const PairedDataset half{w.paired.X.topRows(500), w.paired.Y.topRows(500)};
    const auto mtl = fit_mtl(half, *w.bank, arch, cfg);
    const Matrix pm = predict_mtl(mtl, *w.bank, w.test.X);
    const double mb = test_mse(pb, w);
    const double mm = test_mse(pm, w);
    std::vector<double> gamma(mtl.gamma.data(), mtl.gamma.data() + mtl.gamma.size());
    return Replication{Json{{"method", "mtl"},
                            {"n", 500},
                            {"test_mse", mm},
                            {"baseline_n", 1000},
                            {"baseline_test_mse", mb},
                            {"gamma", gamma},
                            {"metrics", clip_metrics(pm, w.test.Y)},
                            {"baseline_metrics", clip_metrics(pb, w.test.Y)}},
                       {mb, mm}};
  });
  const double mb = median(column(reps, 0));
  const double mm = median(column(reps, 1));
  Json s{{"suite", "mtl-efficiency"}, {"replications", count}, {"master_seed", opts.master_seed},
         {"median_baseline_test_mse_n1000", mb}, {"median_mtl_test_mse_n500", mm}};
  return finish(std::move(reps), std::move(s), mm <= mb);
}

SuiteResult lasso_recovery(const SuiteOptions& opts) {
  const std::size_t count = opts.seeds ? opts.seeds : 20;
  auto reps = replicate("lasso-recovery", opts, count, [](std::size_t, std::uint64_t seed) {
    const GeneratedWorld w = generate(subject_world(seed, 32, 20, 0.05), 2000, 0, 1);
    const MtlOptions mo;
    const SigmaEstimate sig = estimate_sigma(w.paired, *w.bank);
    const SourceGram gram = source_gram(source_predictions(*w.bank, w.paired.X), w.paired.Y);
    const double c = mo.wts_c * (mo.scale_by_source_energy ? std::sqrt(gram.G.diagonal().maxCoeff()) : 1.0);
    const double lambda = lambda_wts(sig.sigma, w.bank->K(), w.paired.n(), c);
    const LassoResult lasso = fit_weights_lasso(gram, lambda, mo.lasso_tol, mo.max_sweeps);
    const Vector& truth = w.subjects->gamma_star;
    bool exact = true;
    for (Eigen::Index k = 0; k < truth.size(); ++k) exact = exact && ((lasso.gamma[k] != 0.0) == (truth[k] != 0.0));
    Json j{{"method", "lasso"}, {"lambda", lambda}, {"sigma_hat", sig.sigma},
           {"support_recovered", exact}, {"lasso", io::to_json(lasso)}};
    return Replication{std::move(j), {exact ? 1.0 : 0.0, lasso.kkt_ok ? 1.0 : 0.0}};
  });
  const auto rec = column(reps, 0);
  const auto kkt = column(reps, 1);
  const double rec_rate = std::accumulate(rec.begin(), rec.end(), 0.0) / static_cast<double>(count);
  const double kkt_rate = std::accumulate(kkt.begin(), kkt.end(), 0.0) / static_cast<double>(count);
  Json s{{"suite", "lasso-recovery"}, {"replications", count}, {"master_seed", opts.master_seed},
         {"recovery_rate", rec_rate}, {"kkt_rate", kkt_rate}};
  return finish(std::move(reps), std::move(s), rec_rate >= 0.9 && kkt_rate == 1.0);
}

SuiteResult gradcheck(const SuiteOptions& opts) {
  const std::size_t count = opts.seeds ? opts.seeds : 50;
  auto reps = replicate("gradcheck", opts, count, [](std::size_t rep, std::uint64_t seed) {
    Rng rng(seed);
    const Activation acts[] = {Activation::relu(), Activation::leaky_relu(0.1), Activation::tanh()};
    Architecture arch;
    arch.activation = acts[rep % 3];
    arch.bias = {rng.uniform() < 0.5, rng.uniform() < 0.5};
    std::size_t d = 0, m = 0;
    do {
      d = 1 + rng.below(8);
      m = 1 + rng.below(6);
      arch.hidden.assign(rng.below(3), 0);
      for (auto& h : arch.hidden) h = 1 + rng.below(8);
    } while (p_total_for(arch, d, m) > 200);
    Rng init = rng.split(1);
    const MlpParams params = MlpParams::random_init(layer_dims(arch, d, m), arch.activation, 1.5,
                                                    arch.bias, -1.0, init);
    Matrix X(8, static_cast<Eigen::Index>(d));
    Matrix Y(8, static_cast<Eigen::Index>(m));
    for (auto& v : X.reshaped()) v = rng.normal();
    for (auto& v : Y.reshaped()) v = rng.normal();
    const double err = gradcheck_error(params, X, Y, 1e-5);
    return Replication{Json{{"method", "analytic"}, {"activation", arch.activation.name()},
                            {"params", params.p_total()}, {"max_rel_error", err}},
                       {err}};
  });
  const auto errs = column(reps, 0);
  const double worst = *std::max_element(errs.begin(), errs.end());
  Json s{{"suite", "gradcheck"}, {"replications", count}, {"master_seed", opts.master_seed},
         {"max_rel_error", worst}, {"threshold", 1e-5}};
  return finish(std::move(reps), std::move(s), worst <= 1e-5);
}

SuiteResult projection_oracle(const SuiteOptions& opts) {
  const std::size_t count = opts.seeds ? opts.seeds : 200;
  auto reps = replicate("projection-oracle", opts, count, [](std::size_t rep, std::uint64_t seed) {
    Rng rng(seed);
    const double qs[] = {1.0, 1.5, 2.0};
    const double q = qs[rep % 3];
    const auto len = static_cast<Eigen::Index>(1 + rng.below(8));
    Matrix W(1, len);
    for (auto& v : W.reshaped()) v = rng.uniform(-3.0, 3.0);
    const double radius = rng.uniform(0.2, 2.0);
    const Matrix P = project_lq_ball(W, q, radius);
    const Vector ref = reference_projection(W.row(0).transpose(), q, radius);
    const double proj_err = (P.row(0).transpose() - ref).cwiseAbs().maxCoeff();

    const double scale = rng.uniform(0.01, 2.0);
    const Matrix X = prox_lq_power(W, q, scale);
    double kkt = 0.0;
    for (Eigen::Index j = 0; j < len; ++j) {
      const double w = W(0, j), x = X(0, j);
      double v = 0.0;
      if (x != 0.0) {
        v = std::abs(x - w + scale * q * std::pow(std::abs(x), q - 1.0) * (x > 0 ? 1.0 : -1.0));
      } else if (q == 1.0) {
        v = std::max(0.0, std::abs(w) - scale);
      } else {
        v = std::abs(w);
      }
      kkt = std::max(kkt, v);
    }
    return Replication{Json{{"method", "project_lq_ball"}, {"q", q}, {"length", len},
                            {"projection_error", proj_err}, {"prox_kkt_residual", kkt}},
                       {proj_err, kkt}};
  });
  const auto pe = column(reps, 0);
  const auto ke = column(reps, 1);
  const double worst_p = *std::max_element(pe.begin(), pe.end());
  const double worst_k = *std::max_element(ke.begin(), ke.end());
  Json s{{"suite", "projection-oracle"}, {"replications", count}, {"master_seed", opts.master_seed},
         {"max_projection_error", worst_p}, {"max_prox_kkt_residual", worst_k}};
  return finish(std::move(reps), std::move(s), worst_p <= 1e-6 && worst_k <= 1e-8);
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"safety-isl", "enhance-isl", "unpaired-size", "mtl-efficiency",
          "lasso-recovery", "gradcheck", "projection-oracle"};
}

SuiteResult run_suite(const std::string& name, const SuiteOptions& opts) {
  if (name == "safety-isl") return safety_isl(opts);
  if (name == "enhance-isl") return enhance_isl(opts);
  if (name == "unpaired-size") return unpaired_size(opts);
  if (name == "mtl-efficiency") return mtl_efficiency(opts);
  if (name == "lasso-recovery") return lasso_recovery(opts);
  if (name == "gradcheck") return gradcheck(opts);
  if (name == "projection-oracle") return projection_oracle(opts);
  throw Error(ErrorKind::Usage, "unknown suite '" + name + "'");
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t rep) { return mix_seed(master, rep); }

Vector reference_projection(const Vector& w, double q, double radius) {
  const Vector a = w.cwiseAbs();
  const auto norm_q = [q](const Vector& v) { return std::pow(v.array().pow(q).sum(), 1.0 / q); };
  if (norm_q(a) <= radius) return w;
  // Coordinate solution of min 0.5 (t - a)^2 + mu t^q on [0, a].
  const auto coord = [q](double ai, double mu) {
    double lo = 0.0, hi = ai;
    for (int it = 0; it < 200; ++it) {
      const double t = 0.5 * (lo + hi);
      const double g = t - ai + mu * q * std::pow(t, q - 1.0);
      (g > 0.0 ? hi : lo) = t;
    }
    return 0.5 * (lo + hi);
  };
  const auto solve = [&](double mu) {
    Vector t(a.size());
    for (Eigen::Index i = 0; i < a.size(); ++i) t[i] = coord(a[i], mu);
    return t;
  };
  double lo = 0.0, hi = 1.0;
  while (norm_q(solve(hi)) > radius) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mu = 0.5 * (lo + hi);
    (norm_q(solve(mu)) > radius ? lo : hi) = mu;
  }
  Vector t = solve(hi);
  for (Eigen::Index i = 0; i < w.size(); ++i) t[i] = w[i] < 0.0 ? -t[i] : t[i];
  return t;
}

double gradcheck_error(const MlpParams& params, const Matrix& X, const Matrix& Y, double h) {
  const LossGrad lg = loss_and_grad(params, X, Y);
  MlpParams probe = params;
  double worst = 0.0;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < params.layer(l).rows(); ++i) {
      for (Eigen::Index j = 0; j < params.layer(l).cols(); ++j) {
        const double w0 = params.layer(l)(i, j);
        probe.layer(l)(i, j) = w0 + h;
        const double up = mse_loss(probe, X, Y);
        probe.layer(l)(i, j) = w0 - h;
        const double down = mse_loss(probe, X, Y);
        probe.layer(l)(i, j) = w0;
        const double fd = (up - down) / (2.0 * h);
        const double an = lg.grads[l](i, j);
        worst = std::max(worst, std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)}));
      }
    }
  }
  return worst;
}

}  // namespace embalign::bench
