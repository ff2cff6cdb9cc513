#include "embalign/cli.hpp"

#include "embalign/bench_suites.hpp"
#include "embalign/diagnostics.hpp"
#include "embalign/error.hpp"
#include "embalign/gradient.hpp"
#include "embalign/io/csv.hpp"
#include "embalign/io/emb1.hpp"
#include "embalign/io/json_io.hpp"
#include "embalign/io/mdl1.hpp"
#include "embalign/isl.hpp"
#include "embalign/metrics.hpp"
#include "embalign/mtl.hpp"
#include "embalign/rng.hpp"
#include "embalign/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

namespace embalign {
namespace {

namespace fs = std::filesystem;
using io::Json;

constexpr std::size_t kDiagnosticsMc = 4000;

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorKind::Usage, msg); }

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!text.empty() && text.front() == '-') throw std::invalid_argument(text);
    v = std::stoull(text, &used, 0);
  } catch (const std::exception&) {
    usage(what + " must be a non-negative integer, got '" + text + "'");
  }
  if (used != text.size()) usage(what + " must be a non-negative integer, got '" + text + "'");
  return v;
}

/// --seed wins over the config's seed, which wins over ALIGN_SEED.
std::uint64_t resolve_seed(const std::optional<std::string>& flag, const Json& config) {
  if (flag) return parse_u64(*flag, "--seed");
  if (config.is_object() && config.contains("seed")) {
    if (!config.at("seed").is_number_unsigned()) usage("config: key 'seed' must be a non-negative integer");
    return config.at("seed").get<std::uint64_t>();
  }
  if (const char* env = std::getenv("ALIGN_SEED")) return parse_u64(env, "ALIGN_SEED");
  return 0;
}

Json read_config_json(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    usage("config: " + path + " is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { io::write_file(path, io::dump(j)); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) usage("cannot create directory '" + dir.string() + "': " + ec.message());
}

Json model_entry(const std::string& role, const std::string& file, const MlpParams& p) {
  return Json{{"role", role}, {"file", file}, {"digest", hex64(io::model_digest(p))}};
}

void write_bank(const fs::path& dir, const SourceBank& bank) {
  ensure_dir(dir);
  Json labels = Json::array();
  for (std::size_t k = 0; k < bank.K(); ++k) {
    io::write_model(dir / (bank.labels[k] + ".mdl"), bank.models[k]);
    labels.push_back(bank.labels[k]);
  }
  write_json(dir / "bank.json", Json{{"labels", labels}, {"digest", hex64(bank.digest())}});
}

/// Models listed in bank.json in order, or every *.mdl file sorted by name.
SourceBank read_bank(const fs::path& dir) {
  if (!fs::is_directory(dir)) usage("bank directory '" + dir.string() + "' does not exist");
  SourceBank bank;
  if (fs::exists(dir / "bank.json")) {
    Json j;
    try {
      j = Json::parse(io::read_file(dir / "bank.json"));
      for (const auto& l : j.at("labels")) bank.labels.push_back(l.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, "bank.json: " + std::string(e.what()));
    }
  } else {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.path().extension() == ".mdl") bank.labels.push_back(e.path().stem().string());
    }
    std::sort(bank.labels.begin(), bank.labels.end());
  }
  if (bank.labels.empty()) throw Error(ErrorKind::Data, "bank directory '" + dir.string() + "' holds no models");
  for (const auto& l : bank.labels) bank.models.push_back(io::read_model(dir / (l + ".mdl")));
  return bank;
}

// ---- fit ----

struct FitInputs {
  PairedDataset paired;
  UnpairedResponses unpaired;
  std::optional<SourceBank> bank;
  std::optional<GeneratedWorld> world;
};

FitInputs load_inputs(const io::RunConfig& cfg) {
  FitInputs in;
  if (cfg.world) {
    if (cfg.paths.x || cfg.paths.y || cfg.paths.unpaired) {
      usage("config: 'world' and 'paths.x/y/unpaired' are mutually exclusive");
    }
    in.world = generate(cfg.world->spec, cfg.world->n, cfg.world->N, cfg.world->n_test);
    in.paired = in.world->paired;
    in.unpaired = in.world->unpaired;
    in.bank = in.world->bank;
  } else {
    if (!cfg.paths.x || !cfg.paths.y) usage("config: needs either 'world' or both 'paths.x' and 'paths.y'");
    in.paired = {io::read_embeddings(*cfg.paths.x), io::read_embeddings(*cfg.paths.y)};
    in.paired.validate();
    in.unpaired.Y = cfg.paths.unpaired ? io::read_embeddings(*cfg.paths.unpaired)
                                       : Matrix(0, in.paired.Y.cols());
  }
  if (cfg.paths.bank_dir) in.bank = read_bank(*cfg.paths.bank_dir);
  return in;
}

int cmd_fit(const std::string& config_path, const std::optional<std::string>& seed_flag,
            const std::string& out_dir, std::ostream& out) {
  Json raw = read_config_json(config_path);
  const std::uint64_t seed = resolve_seed(seed_flag, raw);
  if (!raw.is_object()) usage("config: root must be an object");
  raw["seed"] = seed;
  io::RunConfig cfg = io::parse_run_config(raw);
  cfg.train.seed = mix_seed(seed, 1);

  const FitInputs in = load_inputs(cfg);
  const fs::path dir(out_dir);
  ensure_dir(dir);

  Json report{{"method", io::method_name(cfg.method)}, {"seed", seed},
              {"n", in.paired.n()}, {"d", in.paired.d()}, {"m", in.paired.m()}};
  Json models = Json::array();
  Json notes = Json::array();
  std::function<Matrix(const Matrix&)> predict;
  std::optional<IslModel> isl_model;

  switch (cfg.method) {
    case io::Method::Baseline: {
      auto m = std::make_shared<AlignmentModel>(fit_baseline(in.paired, cfg.architecture, cfg.train));
      io::write_model(dir / "model.mdl", m->params);
      models.push_back(model_entry("model", "model.mdl", m->params));
      report["architecture"] = io::to_json(cfg.architecture);
      report["fit"] = io::to_json(m->report);
      predict = [m](const Matrix& X) { return forward_batch(m->params, X); };
      break;
    }
    case io::Method::Isl: {
      const IslArchitectures archs{cfg.inverse_architecture.value_or(cfg.architecture), cfg.architecture,
                                   cfg.residual_architecture.value_or(cfg.architecture)};
      if (in.unpaired.Y.rows() > 0 && in.unpaired.Y.cols() != in.paired.Y.cols()) {
        throw_shape("unpaired responses have " + std::to_string(in.unpaired.Y.cols()) +
                    " columns, paired responses " + std::to_string(in.paired.Y.cols()));
      }
      isl_model = fit_isl(in.paired, in.unpaired, archs, cfg.train);
      const IslModel& m = *isl_model;
      if (m.n_unpaired == 0) {
        notes.push_back("ISL (0): no unpaired responses, so the augmented fit uses the paired rows only "
                        "and the estimator reduces to a baseline fit plus residual correction");
      }
      io::write_model(dir / "inverse.mdl", m.inverse);
      io::write_model(dir / "augmented.mdl", m.augmented);
      io::write_model(dir / "residual.mdl", m.residual);
      models.push_back(model_entry("inverse", "inverse.mdl", m.inverse));
      models.push_back(model_entry("augmented", "augmented.mdl", m.augmented));
      models.push_back(model_entry("residual", "residual.mdl", m.residual));
      report["N"] = m.n_unpaired;
      report["architectures"] = Json{{"inverse", io::to_json(archs.inverse)},
                                     {"augmented", io::to_json(archs.augmented)},
                                     {"residual", io::to_json(archs.residual)}};
      report["lambdas"] = Json{{"inverse", m.lambdas.inv}, {"augmented", m.lambdas.aug},
                               {"residual", m.lambdas.res}};
      report["fit"] = Json{{"inverse", io::to_json(m.inverse_report)},
                           {"augmented", io::to_json(m.augmented_report)},
                           {"residual", io::to_json(m.residual_report)}};
      predict = [&m](const Matrix& X) { return predict_isl(m, X); };
      break;
    }
    case io::Method::Mtl: {
      if (!in.bank) usage("method 'mtl' needs a source bank: set 'paths.bank_dir' or 'world.subjects'");
      auto m = std::make_shared<MtlModel>(fit_mtl(in.paired, *in.bank, cfg.architecture, cfg.train, cfg.mtl));
      io::write_model(dir / "residual.mdl", m->residual);
      models.push_back(model_entry("residual", "residual.mdl", m->residual));
      if (in.world) write_bank(dir / "bank", *in.bank);
      report["architecture"] = io::to_json(cfg.architecture);
      report["gamma"] = std::vector<double>(m->gamma.data(), m->gamma.data() + m->gamma.size());
      report["bank_labels"] = in.bank->labels;
      report["bank_digest"] = hex64(m->bank_digest);
      report["lambda_wts"] = m->lambda_wts;
      report["lambda_res"] = m->lambda_res;
      report["sigma_hat"] = m->sigma_hat;
      report["sigma_ridge_fallback"] = m->sigma_ridge_fallback;
      report["lasso"] = io::to_json(m->lasso);
      report["fit"] = io::to_json(m->residual_report);
      const SourceBank bank = *in.bank;
      predict = [m, bank](const Matrix& X) { return predict_mtl(*m, bank, X); };
      break;
    }
  }
  report["models"] = models;

  if (in.world) {
    const GeneratedWorld& w = *in.world;
    const Matrix pred = predict(w.test.X);
    EvalOptions eo;
    eo.ks = {};
    eo.bootstrap_reps = cfg.eval.bootstrap_reps;
    eo.seed = mix_seed(seed, 2);
    try {
      report["test"] = io::to_json(evaluate(pred, w.test.Y, eo));
    } catch (const Error& e) {
      // e.g. a dead network predicting zero rows; keep the fit, report what is defined
      if (e.kind() != ErrorKind::Domain) throw;
      notes.push_back(std::string("test metrics unavailable: ") + e.what());
      report["test"] = Json{{"mse", mean_sq_error(pred, w.test.Y)}, {"n_test", w.test.Y.rows()}};
    }
    report["test_mse_clean"] = mean_sq_error(pred, w.test_clean);
    report["diagnostics"] = io::to_json(run_diagnostics(w, isl_model ? &*isl_model : nullptr, kDiagnosticsMc));
  }
  report["notes"] = notes;
  write_json(dir / "fit_report.json", report);
  out << io::dump(report);
  return 0;
}

// ---- predict ----

int cmd_predict(const std::string& model_path, const std::string& x_path,
                const std::optional<std::string>& bank_dir, const std::string& out_path,
                std::ostream& out) {
  const Matrix X = io::read_embeddings(x_path);
  Matrix pred;
  const fs::path mp(model_path);
  if (!fs::is_directory(mp)) {
    pred = forward_batch(io::read_model(mp), X);
  } else {
    Json report;
    try {
      report = Json::parse(io::read_file(mp / "fit_report.json"));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Format, "fit_report.json: " + std::string(e.what()));
    }
    const std::string method = report.value("method", "");
    if (method == "baseline") {
      pred = forward_batch(io::read_model(mp / "model.mdl"), X);
    } else if (method == "isl") {
      pred = forward_batch(io::read_model(mp / "augmented.mdl"), X) +
             forward_batch(io::read_model(mp / "residual.mdl"), X);
    } else if (method == "mtl") {
      const fs::path bd = bank_dir ? fs::path(*bank_dir) : mp / "bank";
      const SourceBank bank = read_bank(bd);
      Vector gamma;
      std::uint64_t digest = 0;
      try {
        const auto g = report.at("gamma").get<std::vector<double>>();
        gamma = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
        digest = std::stoull(report.at("bank_digest").get<std::string>(), nullptr, 16);
      } catch (const std::exception& e) {
        throw Error(ErrorKind::Format, "fit_report.json: " + std::string(e.what()));
      }
      MtlModel m{gamma, io::read_model(mp / "residual.mdl"), digest};
      pred = predict_mtl(m, bank, X);
    } else {
      throw Error(ErrorKind::Format, "fit_report.json: unknown method '" + method + "'");
    }
  }
  io::write_embeddings(out_path, pred);
  out << io::dump(Json{{"rows", pred.rows()}, {"cols", pred.cols()}, {"out", out_path}});
  return 0;
}

// ---- eval ----

std::vector<std::size_t> read_labels(const std::string& path) {
  const Matrix L = io::parse_csv(io::read_file(path));
  if (L.cols() != 1) throw Error(ErrorKind::Data, "labels file must have one column");
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const double v = L(i, 0);
    if (v < 0 || v != std::floor(v)) throw Error(ErrorKind::Data, "label on row " + std::to_string(i) + " is not a class index");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path,
             const std::optional<std::string>& labels, const std::optional<std::string>& centroids,
             const std::vector<std::size_t>& ks, std::size_t bootstrap, std::size_t distractors,
             const std::optional<std::string>& seed_flag, const std::optional<std::string>& out_path,
             std::ostream& out) {
  EvalOptions eo;
  eo.ks = ks;
  eo.bootstrap_reps = bootstrap;
  eo.distractors = distractors;
  eo.seed = resolve_seed(seed_flag, Json());
  if (labels.has_value() != centroids.has_value()) usage("--labels and --centroids go together");
  if (labels) {
    eo.labels = read_labels(*labels);
    eo.centroids = io::read_embeddings(*centroids);
  }
  const EvalReport r = evaluate(io::read_embeddings(pred_path), io::read_embeddings(truth_path), eo);
  const Json j = io::to_json(r);
  if (out_path) write_json(*out_path, j);
  out << io::dump(j);
  return 0;
}

// ---- gen-world ----

int cmd_gen_world(const std::string& config_path, const std::optional<std::string>& seed_flag,
                  const std::string& out_dir, std::ostream& out) {
  Json raw = read_config_json(config_path);
  const std::uint64_t seed = resolve_seed(seed_flag, raw);
  if (!raw.is_object()) usage("config: root must be an object");
  Json world_json;
  if (raw.contains("world")) {
    raw["seed"] = seed;
    const io::RunConfig cfg = io::parse_run_config(raw);
    if (!cfg.world) usage("config: missing key 'world'");
    world_json = raw.at("world");
  } else {
    world_json = raw;
  }
  const io::WorldConfig wc = io::parse_world(world_json, seed);
  const GeneratedWorld w = generate(wc.spec, wc.n, wc.N, wc.n_test);
  const fs::path dir(out_dir);
  ensure_dir(dir);
  io::write_embeddings(dir / "X.emb", w.paired.X);
  io::write_embeddings(dir / "Y.emb", w.paired.Y);
  io::write_embeddings(dir / "unpaired.emb", w.unpaired.Y);
  io::write_embeddings(dir / "test_X.emb", w.test.X);
  io::write_embeddings(dir / "test_Y.emb", w.test.Y);
  io::write_embeddings(dir / "test_clean.emb", w.test_clean);
  Json files{{"x", "X.emb"}, {"y", "Y.emb"}, {"unpaired", "unpaired.emb"},
             {"test_x", "test_X.emb"}, {"test_y", "test_Y.emb"}, {"test_clean", "test_clean.emb"}};
  Json manifest{{"seed", seed}, {"d", wc.spec.d}, {"m", wc.spec.m}, {"sigma", wc.spec.sigma},
                {"n", wc.n}, {"N", wc.N}, {"n_test", wc.n_test},
                {"truth", std::holds_alternative<LinearGaussian>(wc.spec.truth) ? "linear" : "mlp"},
                {"unpaired", std::holds_alternative<Adversarial>(wc.spec.unpaired) ? "adversarial" : "informative"}};
  if (w.bank) {
    write_bank(dir / "bank", *w.bank);
    files["bank_dir"] = "bank";
    const SubjectRecord& s = *w.subjects;
    manifest["subjects"] = Json{{"gamma_star", std::vector<double>(s.gamma_star.data(), s.gamma_star.data() + s.gamma_star.size())},
                                {"support", s.support},
                                {"c_aux", s.c_aux}};
  }
  if (w.truth.A) {
    const Matrix& A = *w.truth.A;
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < A.rows(); ++i) rows.push_back(std::vector<double>(A.row(i).data(), A.row(i).data() + A.cols()));
    manifest["A"] = rows;
  }
  manifest["files"] = files;
  write_json(dir / "manifest.json", manifest);
  out << io::dump(manifest);
  return 0;
}

// ---- bench ----

int cmd_bench(const std::string& suite, std::size_t seeds, std::size_t jobs,
              const std::optional<std::string>& seed_flag, const std::optional<std::string>& out_dir,
              std::ostream& out) {
  bench::SuiteOptions opts;
  opts.seeds = seeds;
  opts.jobs = jobs;
  opts.master_seed = resolve_seed(seed_flag, Json());
  const bench::SuiteResult res = bench::run_suite(suite, opts);
  std::string lines;
  for (const auto& l : res.lines) lines += l.dump() + "\n";
  out << lines << res.summary.dump() << "\n";
  if (out_dir) {
    const fs::path dir(*out_dir);
    ensure_dir(dir);
    io::write_file(dir / (suite + ".jsonl"), lines);
    write_json(dir / (suite + "_summary.json"), res.summary);
  }
  return 0;
}

// ---- import-csv ----

int cmd_import_csv(const std::string& in_path, const std::string& out_path, std::ostream& out) {
  const Matrix M = io::parse_csv(io::read_file(in_path));
  if (M.size() == 0) throw Error(ErrorKind::Data, "csv: '" + in_path + "' holds no rows");
  io::write_embeddings(out_path, M);
  out << io::dump(Json{{"rows", M.rows()}, {"cols", M.cols()}, {"out", out_path}});
  return 0;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return 1;
    case ErrorKind::Numeric: return 3;
    default: return 2;
  }
}

void report_error(std::ostream& err, const std::string& kind, const std::string& msg) {
  err << Json{{"error", {{"kind", kind}, {"message", msg}}}}.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Embedding alignment with unpaired and multi-source data"};
  app.require_subcommand(1);

  std::string config, out_path, model, x_path, pred, truth, suite, in_path;
  std::optional<std::string> seed, bank, labels, centroids, out_opt;
  std::vector<std::size_t> ks = {1};
  std::size_t bootstrap = 0, distractors = 0, seeds = 0, jobs = 1;

  auto* fit = app.add_subcommand("fit", "Fit a baseline, ISL or MTL model");
  fit->add_option("--config", config, "Run configuration (JSON)")->required();
  fit->add_option("--seed", seed, "Seed (overrides config and ALIGN_SEED)");
  fit->add_option("--out", out_path, "Output directory")->required();

  auto* pr = app.add_subcommand("predict", "Map an EMB1 X file to predictions");
  pr->add_option("--model", model, "MDL1 file or fit output directory")->required();
  pr->add_option("--x", x_path, "EMB1 predictors")->required();
  pr->add_option("--bank", bank, "Source bank directory (mtl)");
  pr->add_option("--out", out_path, "EMB1 output")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate predictions against truth");
  ev->add_option("--pred", pred, "EMB1 predictions")->required();
  ev->add_option("--truth", truth, "EMB1 targets")->required();
  ev->add_option("--labels", labels, "CSV of class indices");
  ev->add_option("--centroids", centroids, "EMB1 class centroids");
  ev->add_option("--ks", ks, "Top-k values")->delimiter(',');
  ev->add_option("--bootstrap", bootstrap, "Bootstrap replicates");
  ev->add_option("--distractors", distractors, "Sampled distractor classes (0 = all)");
  ev->add_option("--seed", seed, "Seed for bootstrap and sampling");
  ev->add_option("--out", out_opt, "Report path");

  auto* gw = app.add_subcommand("gen-world", "Materialize a synthetic world");
  gw->add_option("--config", config, "World or run configuration (JSON)")->required();
  gw->add_option("--seed", seed, "Seed (overrides config and ALIGN_SEED)");
  gw->add_option("--out", out_path, "Output directory")->required();

  auto* be = app.add_subcommand("bench", "Run a benchmark suite");
  be->add_option("--suite", suite, "Suite name")->required();
  be->add_option("--seeds", seeds, "Replications (0 = suite default)");
  be->add_option("--jobs", jobs, "Concurrent replications")->check(CLI::PositiveNumber);
  be->add_option("--seed", seed, "Master seed");
  be->add_option("--out", out_opt, "Directory for the JSON lines and summary");

  auto* ic = app.add_subcommand("import-csv", "Convert a numeric CSV to EMB1");
  ic->add_option("--in", in_path, "CSV input")->required();
  ic->add_option("--out", out_path, "EMB1 output")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return 1;
  }

  try {
    if (fit->parsed()) return cmd_fit(config, seed, out_path, out);
    if (pr->parsed()) return cmd_predict(model, x_path, bank, out_path, out);
    if (ev->parsed()) return cmd_eval(pred, truth, labels, centroids, ks, bootstrap, distractors, seed, out_opt, out);
    if (gw->parsed()) return cmd_gen_world(config, seed, out_path, out);
    if (be->parsed()) return cmd_bench(suite, seeds, jobs, seed, out_opt, out);
    if (ic->parsed()) return cmd_import_csv(in_path, out_path, out);
  } catch (const Error& e) {
    report_error(err, to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error(err, "internal", e.what());
    return 3;
  }
  return 1;
}

}  // namespace embalign
