#pragma once

// JSON run configuration (strict schema) and report serialization.

#include "embalign/diagnostics.hpp"
#include "embalign/metrics.hpp"
#include "embalign/mtl.hpp"
#include "embalign/synth.hpp"
#include "embalign/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace embalign::io {

using Json = nlohmann::ordered_json;

enum class Method { Baseline, Isl, Mtl };

const char* method_name(Method m);

struct WorldConfig {
  WorldSpec spec;
  std::size_t n = 1000;
  std::size_t N = 0;
  std::size_t n_test = 1000;
};

struct PathConfig {
  std::optional<std::string> x;
  std::optional<std::string> y;
  std::optional<std::string> unpaired;
  std::optional<std::string> bank_dir;
};

struct EvalConfig {
  std::vector<std::size_t> ks = {1};
  std::size_t bootstrap_reps = 0;
  std::size_t distractors = 0;
};

struct RunConfig {
  Method method = Method::Baseline;
  std::optional<std::uint64_t> seed;
  Architecture architecture;
  std::optional<Architecture> inverse_architecture;
  std::optional<Architecture> residual_architecture;
  TrainConfig train;
  MtlOptions mtl;
  std::optional<WorldConfig> world;
  PathConfig paths;
  EvalConfig eval;
};

/// Throws a Usage error naming the offending key on unknown keys, wrong
/// types or out-of-range values. `seed` seeds any generated world pieces.
RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::string& path);

Architecture parse_architecture(const Json& j, const std::string& where);
WorldConfig parse_world(const Json& j, std::uint64_t seed);

Json to_json(const Architecture& arch);
Json to_json(const FitReport& r);
Json to_json(const EvalReport& r);
Json to_json(const DiagnosticsReport& r);
Json to_json(const LassoResult& r);

/// "0.486±0.008" with three decimals.
std::string mean_pm_se(double mean, double se);

/// Deterministic rendering used for every JSON artifact.
std::string dump(const Json& j);

}  // namespace embalign::io
