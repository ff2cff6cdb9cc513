#pragma once

// Seeded benchmark suites. Each replication yields one JSON line; the summary
// carries medians and a pass/fail verdict.

#include "embalign/io/json_io.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace embalign::bench {

struct SuiteOptions {
  /// Replications; 0 means the suite's default.
  std::size_t seeds = 0;
  /// Replications run concurrently.
  std::size_t jobs = 1;
  std::uint64_t master_seed = 0;
};

struct SuiteResult {
  std::vector<io::Json> lines;
  io::Json summary;
  bool pass = false;
};

/// safety-isl, enhance-isl, unpaired-size, mtl-efficiency, lasso-recovery,
/// gradcheck, projection-oracle.
std::vector<std::string> suite_names();

/// Throws a Usage error for unknown names.
SuiteResult run_suite(const std::string& name, const SuiteOptions& opts);

/// Seed of replication `rep`.
std::uint64_t replication_seed(std::uint64_t master, std::size_t rep);

/// Reference projection onto the lq ball: bisection on the multiplier with
/// each coordinate solved by bisection on its stationarity condition.
Vector reference_projection(const Vector& w, double q, double radius);

/// Largest mixed error |a - b| / max(1, |a|, |b|) between the analytic
/// gradient and central differences of the loss with step h.
double gradcheck_error(const MlpParams& params, const Matrix& X, const Matrix& Y, double h);

}  // namespace embalign::bench
