#include "embalign/metrics.hpp"

#include "embalign/error.hpp"
#include "embalign/gradient.hpp"
#include "embalign/kernels.hpp"
#include "embalign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace embalign {
namespace {

void same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw_shape(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                " and " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + " differ");
  }
}

void check_nonconstant(const Matrix& M, const char* which) {
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    if (M.row(i).maxCoeff() == M.row(i).minCoeff()) {
      throw_domain(std::string("clip_correlation: ") + which + " row " + std::to_string(i) +
                   " is constant");
    }
  }
}

double cosine(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  return a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
}

void check_labels(const Matrix& pred, const std::vector<std::size_t>& labels, const Matrix& centroids,
                  std::size_t k) {
  if (k < 1) throw_domain("topk: k must be >= 1");
  if (static_cast<std::size_t>(centroids.rows()) < k) {
    throw_domain("topk: k = " + std::to_string(k) + " exceeds the " +
                 std::to_string(centroids.rows()) + " classes");
  }
  if (centroids.cols() != pred.cols()) throw_shape("topk: centroid width differs from predictions");
  if (labels.size() != static_cast<std::size_t>(pred.rows())) {
    throw_shape("topk: " + std::to_string(labels.size()) + " labels for " +
                std::to_string(pred.rows()) + " predictions");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= static_cast<std::size_t>(centroids.rows())) {
      throw_domain("topk: label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                   " has no centroid");
    }
  }
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    if (centroids.row(c).norm() == 0.0) throw_domain("topk: centroid " + std::to_string(c) + " has zero norm");
  }
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    if (pred.row(i).norm() == 0.0) throw_domain("topk: prediction row " + std::to_string(i) + " has zero norm");
  }
}

// True when `label` ranks within the first k of `candidates` by similarity
// (descending, lower index first on ties).
bool in_topk(const std::vector<double>& sims, const std::vector<std::size_t>& candidates,
             std::size_t label, std::size_t k) {
  const double s_label = sims[label];
  std::size_t ahead = 0;
  for (std::size_t c : candidates) {
    if (c == label) continue;
    if (sims[c] > s_label || (sims[c] == s_label && c < label)) ++ahead;
  }
  return ahead < k;
}

}  // namespace

double clip_distance(const Matrix& pred, const Matrix& truth) {
  same_shape(pred, truth, "clip_distance");
  if (pred.rows() == 0) throw_domain("clip_distance: no rows");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    if (pred.row(i).norm() == 0.0) throw_domain("clip_distance: prediction row " + std::to_string(i) + " has zero norm");
    if (truth.row(i).norm() == 0.0) throw_domain("clip_distance: truth row " + std::to_string(i) + " has zero norm");
    sum += cosine(pred.row(i), truth.row(i));
  }
  return sum / static_cast<double>(pred.rows());
}

double clip_correlation(const Matrix& pred, const Matrix& truth) {
  same_shape(pred, truth, "clip_correlation");
  if (pred.rows() < 2) throw_domain("clip_correlation: need n >= 2");
  if (pred.cols() < 2) throw_domain("clip_correlation: need m >= 2");
  check_nonconstant(pred, "prediction");
  check_nonconstant(truth, "truth");
  return kernels::parallel::clip_correlation(pred, truth);
}

double topk_accuracy(const Matrix& pred, const std::vector<std::size_t>& labels,
                     const Matrix& centroids, std::size_t k) {
  check_labels(pred, labels, centroids, k);
  if (pred.rows() == 0) throw_domain("topk: no rows");
  const auto C = static_cast<std::size_t>(centroids.rows());
  std::vector<std::size_t> all(C);
  for (std::size_t c = 0; c < C; ++c) all[c] = c;
  std::vector<double> sims(C);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    for (std::size_t c = 0; c < C; ++c) sims[c] = cosine(pred.row(i), centroids.row(static_cast<Eigen::Index>(c)));
    hits += in_topk(sims, all, labels[static_cast<std::size_t>(i)], k) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.rows());
}

double topk_accuracy_sampled(const Matrix& pred, const std::vector<std::size_t>& labels,
                             const Matrix& centroids, std::size_t k, std::size_t distractors,
                             std::uint64_t seed) {
  check_labels(pred, labels, centroids, k);
  if (pred.rows() == 0) throw_domain("topk: no rows");
  const auto C = static_cast<std::size_t>(centroids.rows());
  if (distractors + 1 > C) throw_domain("topk: more distractors than other classes");
  if (k > distractors + 1) throw_domain("topk: k exceeds the candidate set");
  Rng rng(seed);
  std::vector<double> sims(C);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const std::size_t label = labels[static_cast<std::size_t>(i)];
    std::vector<std::size_t> others;
    for (std::size_t c = 0; c < C; ++c) {
      if (c != label) others.push_back(c);
    }
    // Partial Fisher-Yates for the first `distractors` entries.
    for (std::size_t j = 0; j < distractors; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(rng.below(others.size() - j));
      std::swap(others[j], others[pick]);
    }
    std::vector<std::size_t> candidates(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(distractors));
    candidates.push_back(label);
    for (std::size_t c : candidates) sims[c] = cosine(pred.row(i), centroids.row(static_cast<Eigen::Index>(c)));
    hits += in_topk(sims, candidates, label, k) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.rows());
}

double r2_score(const Matrix& pred, const Matrix& truth) {
  same_shape(pred, truth, "r2");
  if (pred.rows() == 0) throw_domain("r2: no rows");
  const double sse = (pred - truth).squaredNorm();
  const Eigen::RowVectorXd mean = truth.colwise().mean();
  const double sst = (truth.rowwise() - mean).squaredNorm();
  if (sst == 0.0) return sse == 0.0 ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

EvalReport evaluate(const Matrix& pred, const Matrix& truth, const EvalOptions& opts) {
  same_shape(pred, truth, "evaluate");
  if (pred.rows() < 1) throw_domain("evaluate: need at least one test row");
  const bool with_topk = opts.labels.has_value() && opts.centroids.has_value();
  if (opts.labels.has_value() != opts.centroids.has_value()) {
    throw_domain("evaluate: labels and centroids must be given together");
  }

  auto compute = [&](const Matrix& P, const Matrix& T, const std::vector<std::size_t>* labels) {
    EvalReport r;
    r.n_test = static_cast<std::size_t>(P.rows());
    r.clip_distance = clip_distance(P, T);
    r.clip_correlation = clip_correlation(P, T);
    r.mse = mean_sq_error(P, T);
    r.r2 = r2_score(P, T);
    if (with_topk) {
      for (std::size_t k : opts.ks) {
        r.topk_accuracy[k] = opts.distractors == 0
                                 ? topk_accuracy(P, *labels, *opts.centroids, k)
                                 : topk_accuracy_sampled(P, *labels, *opts.centroids, k,
                                                         opts.distractors, opts.seed);
      }
    }
    return r;
  };

  EvalReport report = compute(pred, truth, with_topk ? &*opts.labels : nullptr);
  if (opts.bootstrap_reps == 0) return report;

  const auto n = static_cast<std::size_t>(pred.rows());
  Rng rng = Rng(opts.seed).split(0xB007);
  std::map<std::string, std::vector<double>> draws;
  std::vector<std::size_t> idx(n);
  std::vector<std::size_t> labels(n);
  for (std::size_t rep = 0; rep < opts.bootstrap_reps; ++rep) {
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::size_t>(rng.below(n));
    if (with_topk) {
      for (std::size_t i = 0; i < n; ++i) labels[i] = (*opts.labels)[idx[i]];
    }
    const EvalReport r = compute(gather_rows(pred, idx), gather_rows(truth, idx), with_topk ? &labels : nullptr);
    draws["clip_distance"].push_back(r.clip_distance);
    draws["clip_correlation"].push_back(r.clip_correlation);
    draws["mse"].push_back(r.mse);
    draws["r2"].push_back(r.r2);
    for (const auto& [k, v] : r.topk_accuracy) draws["top" + std::to_string(k)].push_back(v);
  }
  std::map<std::string, double> se;
  for (const auto& [name, xs] : draws) {
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    se[name] = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
  }
  report.bootstrap_se = std::move(se);
  return report;
}

double median(std::vector<double> values) {
  if (values.empty()) throw_domain("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 == 1 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

double bootstrap_median_se(const std::vector<double>& values, std::size_t reps, std::uint64_t seed) {
  if (values.empty()) throw_domain("bootstrap of an empty sample");
  if (reps < 2) throw_domain("bootstrap needs at least 2 replicates");
  Rng rng(seed);
  std::vector<double> meds;
  std::vector<double> sample(values.size());
  for (std::size_t r = 0; r < reps; ++r) {
    for (auto& s : sample) s = values[static_cast<std::size_t>(rng.below(values.size()))];
    meds.push_back(median(sample));
  }
  const double mean = std::accumulate(meds.begin(), meds.end(), 0.0) / static_cast<double>(reps);
  double ss = 0.0;
  for (double m : meds) ss += (m - mean) * (m - mean);
  return std::sqrt(ss / static_cast<double>(reps - 1));
}

}  // namespace embalign
