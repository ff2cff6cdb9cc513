#pragma once

// Embedding-space evaluation metrics and the report that bundles them.

#include "embalign/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace embalign {

/// Mean row-wise cosine similarity. Throws DomainError naming the first
/// zero-norm row.
double clip_distance(const Matrix& pred, const Matrix& truth);

/// (1/n) sum_i (1/(n-1)) sum_{j != i} 1[rho(pred_i, truth_i) > rho(pred_i, truth_j)]
/// with rho the Pearson correlation across coordinates. Ties count as
/// failures. Needs n >= 2, m >= 2 and no constant rows.
double clip_correlation(const Matrix& pred, const Matrix& truth);

/// Fraction of rows whose true label is among the k centroids most
/// cosine-similar to the prediction. Ties in similarity rank the lower class
/// index first.
double topk_accuracy(const Matrix& pred, const std::vector<std::size_t>& labels,
                     const Matrix& centroids, std::size_t k);

/// topk_accuracy where each row is ranked against its true class plus
/// `distractors` other classes drawn without replacement from a seeded stream.
double topk_accuracy_sampled(const Matrix& pred, const std::vector<std::size_t>& labels,
                             const Matrix& centroids, std::size_t k, std::size_t distractors,
                             std::uint64_t seed);

/// 1 - SSE / SST with SST taken around the column means of truth. When truth
/// is constant, 1 for an exact fit and 0 otherwise.
double r2_score(const Matrix& pred, const Matrix& truth);

struct EvalOptions {
  std::optional<std::vector<std::size_t>> labels;
  std::optional<Matrix> centroids;
  std::vector<std::size_t> ks = {1};
  /// 0 ranks against every centroid.
  std::size_t distractors = 0;
  std::size_t bootstrap_reps = 0;
  std::uint64_t seed = 0;
};

struct EvalReport {
  double clip_distance = 0.0;
  double clip_correlation = 0.0;
  std::map<std::size_t, double> topk_accuracy;
  double mse = 0.0;
  double r2 = 0.0;
  std::size_t n_test = 0;
  /// Keyed by metric name ("clip_distance", "top1", ...).
  std::optional<std::map<std::string, double>> bootstrap_se;
};

/// All metrics; top-k only when labels and centroids are given. Bootstrap
/// standard errors resample rows with replacement.
EvalReport evaluate(const Matrix& pred, const Matrix& truth, const EvalOptions& opts = {});

double median(std::vector<double> values);

/// Bootstrap standard error of the median of `values`.
double bootstrap_median_se(const std::vector<double>& values, std::size_t reps,
                           std::uint64_t seed);

}  // namespace embalign
