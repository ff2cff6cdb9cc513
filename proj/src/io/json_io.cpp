#include "embalign/io/json_io.hpp"

#include "embalign/error.hpp"
#include "embalign/io/emb1.hpp"
#include "embalign/rng.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace embalign::io {
namespace {

[[noreturn]] void usage(const std::string& msg) { throw Error(ErrorKind::Usage, msg); }

std::string join(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

void check_object(const Json& j, const std::string& where) {
  if (!j.is_object()) usage("config: " + (where.empty() ? std::string("root") : where) + " must be an object");
}

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  check_object(j, where);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.count(item.key())) usage("config: unknown key '" + join(where, item.key()) + "'");
  }
}

template <typename T>
T get(const Json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    usage("config: key '" + join(where, key) + "' has the wrong type");
  }
}

std::size_t get_count(const Json& j, const std::string& key, const std::string& where, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    usage("config: key '" + join(where, key) + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

std::vector<std::size_t> get_counts(const Json& j, const std::string& key, const std::string& where,
                                    std::vector<std::size_t> fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_array()) usage("config: key '" + join(where, key) + "' must be an array");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer() || e.get<long long>() < 1) {
      usage("config: key '" + join(where, key) + "' must hold positive integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

Matrix get_matrix(const Json& j, const std::string& key, const std::string& where) {
  const std::string name = join(where, key);
  if (!j.contains(key)) usage("config: missing key '" + name + "'");
  const Json& v = j.at(key);
  if (!v.is_array() || v.empty() || !v.front().is_array()) usage("config: key '" + name + "' must be a matrix");
  Matrix M(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v.front().size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_array() || v[i].size() != v.front().size()) usage("config: key '" + name + "' is ragged");
    for (std::size_t c = 0; c < v[i].size(); ++c) {
      if (!v[i][c].is_number()) usage("config: key '" + name + "' must hold numbers");
      M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v[i][c].get<double>();
    }
  }
  return M;
}

TrainConfig parse_train(const Json& j, const std::string& where) {
  check_keys(j, where, {"q", "lambda", "select_c", "c_grid", "epochs", "batch_size", "learning_rate",
                        "lr_decay", "val_fraction", "patience", "constraint_radius",
                        "enforce_constraint", "tol"});
  TrainConfig t;
  t.q = get<double>(j, "q", where, t.q);
  if (j.contains("lambda")) {
    const Json& l = j.at("lambda");
    const std::string lw = join(where, "lambda");
    check_keys(l, lw, {"mode", "c", "value"});
    const auto mode = get<std::string>(l, "mode", lw, "theory");
    if (mode == "theory") {
      if (l.contains("value")) usage("config: key '" + join(lw, "value") + "' is only valid with mode 'fixed'");
      t.lambda_mode = TheoryRate{get<double>(l, "c", lw, TheoryRate{}.c)};
    } else if (mode == "fixed") {
      if (l.contains("c")) usage("config: key '" + join(lw, "c") + "' is only valid with mode 'theory'");
      if (!l.contains("value")) usage("config: missing key '" + join(lw, "value") + "'");
      t.lambda_mode = FixedLambda{get<double>(l, "value", lw, 0.0)};
    } else {
      usage("config: key '" + join(lw, "mode") + "' must be 'theory' or 'fixed'");
    }
  }
  t.select_c = get<bool>(j, "select_c", where, t.select_c);
  t.c_grid = get<std::vector<double>>(j, "c_grid", where, t.c_grid);
  t.epochs = get_count(j, "epochs", where, t.epochs);
  t.batch_size = get_count(j, "batch_size", where, t.batch_size);
  t.learning_rate = get<double>(j, "learning_rate", where, t.learning_rate);
  t.lr_decay = get<double>(j, "lr_decay", where, t.lr_decay);
  t.val_fraction = get<double>(j, "val_fraction", where, t.val_fraction);
  t.patience = get_count(j, "patience", where, t.patience);
  t.constraint_radius = get<double>(j, "constraint_radius", where, t.constraint_radius);
  t.enforce_constraint = get<bool>(j, "enforce_constraint", where, t.enforce_constraint);
  t.tol = get<double>(j, "tol", where, t.tol);
  try {
    t.validate();
  } catch (const Error& e) {
    usage(std::string("config: ") + where + ": " + e.what());
  }
  return t;
}

MtlOptions parse_mtl(const Json& j, const std::string& where) {
  check_keys(j, where, {"wts_c", "scale_by_source_energy", "lasso_tol", "max_sweeps"});
  MtlOptions o;
  o.wts_c = get<double>(j, "wts_c", where, o.wts_c);
  o.scale_by_source_energy = get<bool>(j, "scale_by_source_energy", where, o.scale_by_source_energy);
  o.lasso_tol = get<double>(j, "lasso_tol", where, o.lasso_tol);
  o.max_sweeps = get_count(j, "max_sweeps", where, o.max_sweeps);
  if (!(o.wts_c > 0.0) || !(o.lasso_tol > 0.0) || o.max_sweeps == 0) {
    usage("config: " + where + " needs wts_c > 0, lasso_tol > 0 and max_sweeps >= 1");
  }
  return o;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::Baseline: return "baseline";
    case Method::Isl: return "isl";
    case Method::Mtl: return "mtl";
  }
  return "unknown";
}

Architecture parse_architecture(const Json& j, const std::string& where) {
  check_keys(j, where, {"hidden", "activation", "bias"});
  Architecture a;
  a.hidden = get_counts(j, "hidden", where, {});
  try {
    a.activation = Activation::parse(get<std::string>(j, "activation", where, "relu"));
  } catch (const Error& e) {
    usage("config: key '" + join(where, "activation") + "': " + e.what());
  }
  if (j.contains("bias")) {
    const std::string bw = join(where, "bias");
    check_keys(j.at("bias"), bw, {"input", "hidden"});
    a.bias.input = get<bool>(j.at("bias"), "input", bw, false);
    a.bias.hidden = get<bool>(j.at("bias"), "hidden", bw, false);
  }
  return a;
}

WorldConfig parse_world(const Json& j, std::uint64_t seed) {
  const std::string where = "world";
  check_keys(j, where, {"d", "m", "sigma", "truth", "unpaired", "subjects", "n", "N", "n_test"});
  WorldConfig w;
  w.spec.seed = seed;
  w.spec.d = get_count(j, "d", where, 0);
  w.spec.m = get_count(j, "m", where, 0);
  w.spec.sigma = get<double>(j, "sigma", where, w.spec.sigma);
  w.n = get_count(j, "n", where, w.n);
  w.N = get_count(j, "N", where, w.N);
  w.n_test = get_count(j, "n_test", where, w.n_test);

  if (!j.contains("truth")) usage("config: missing key 'world.truth'");
  const Json& t = j.at("truth");
  const std::string tw = "world.truth";
  check_object(t, tw);
  const auto kind = get<std::string>(t, "kind", tw, "");
  if (kind == "mlp") {
    check_keys(t, tw, {"kind", "hidden", "activation", "bias", "q", "input_scale"});
    MlpTruth mt;
    Json arch = Json::object();
    for (const char* k : {"hidden", "activation", "bias"}) {
      if (t.contains(k)) arch[k] = t.at(k);
    }
    mt.arch = parse_architecture(arch, tw);
    mt.q = get<double>(t, "q", tw, mt.q);
    mt.input_scale = get<double>(t, "input_scale", tw, mt.input_scale);
    w.spec.truth = mt;
  } else if (kind == "linear") {
    check_keys(t, tw, {"kind", "A", "sigma_x"});
    w.spec.truth = LinearGaussian{get_matrix(t, "A", tw), get_matrix(t, "sigma_x", tw)};
  } else if (kind == "linear_random") {
    check_keys(t, tw, {"kind", "a_norm", "signal_scale", "nuisance_scale"});
    Rng rng = Rng(seed).split(0x11AE);
    try {
      w.spec.truth = random_linear_gaussian(w.spec.d, w.spec.m, get<double>(t, "a_norm", tw, 1.0),
                                            get<double>(t, "signal_scale", tw, 1.0),
                                            get<double>(t, "nuisance_scale", tw, 0.1), rng);
    } catch (const Error& e) {
      usage(std::string("config: world.truth: ") + e.what());
    }
  } else {
    usage("config: key 'world.truth.kind' must be 'mlp', 'linear' or 'linear_random'");
  }

  if (j.contains("unpaired")) {
    const Json& u = j.at("unpaired");
    const std::string uw = "world.unpaired";
    check_keys(u, uw, {"kind", "shift_scale"});
    const auto ukind = get<std::string>(u, "kind", uw, "informative");
    if (ukind == "informative") {
      if (u.contains("shift_scale")) usage("config: key 'world.unpaired.shift_scale' needs kind 'adversarial'");
      w.spec.unpaired = Informative{};
    } else if (ukind == "adversarial") {
      w.spec.unpaired = Adversarial{get<double>(u, "shift_scale", uw, 3.0)};
    } else {
      usage("config: key 'world.unpaired.kind' must be 'informative' or 'adversarial'");
    }
  }

  if (j.contains("subjects")) {
    const Json& s = j.at("subjects");
    const std::string sw = "world.subjects";
    check_keys(s, sw, {"K", "s_star", "gamma_star", "residual_scale"});
    MultiSubjectSpec ms;
    ms.K = get_count(s, "K", sw, ms.K);
    ms.s_star = get_count(s, "s_star", sw, ms.s_star);
    ms.residual_scale = get<double>(s, "residual_scale", sw, ms.residual_scale);
    if (s.contains("gamma_star")) {
      const auto g = get<std::vector<double>>(s, "gamma_star", sw, {});
      ms.gamma_star = Eigen::Map<const Vector>(g.data(), static_cast<Eigen::Index>(g.size()));
    }
    w.spec.subjects = ms;
  }
  try {
    w.spec.validate();
  } catch (const Error& e) {
    usage(std::string("config: world: ") + e.what());
  }
  return w;
}

RunConfig parse_run_config(const Json& j) {
  check_keys(j, "", {"method", "seed", "architecture", "inverse_architecture", "residual_architecture",
                     "train", "mtl", "world", "paths", "eval"});
  RunConfig c;
  const auto method = get<std::string>(j, "method", "", "baseline");
  if (method == "baseline") c.method = Method::Baseline;
  else if (method == "isl") c.method = Method::Isl;
  else if (method == "mtl") c.method = Method::Mtl;
  else usage("config: key 'method' must be 'baseline', 'isl' or 'mtl'");

  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) usage("config: key 'seed' must be a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("architecture")) c.architecture = parse_architecture(j.at("architecture"), "architecture");
  if (j.contains("inverse_architecture")) {
    c.inverse_architecture = parse_architecture(j.at("inverse_architecture"), "inverse_architecture");
  }
  if (j.contains("residual_architecture")) {
    c.residual_architecture = parse_architecture(j.at("residual_architecture"), "residual_architecture");
  }
  if (j.contains("train")) c.train = parse_train(j.at("train"), "train");
  if (j.contains("mtl")) c.mtl = parse_mtl(j.at("mtl"), "mtl");
  if (j.contains("world")) c.world = parse_world(j.at("world"), c.seed.value_or(0));
  if (j.contains("paths")) {
    const Json& p = j.at("paths");
    check_keys(p, "paths", {"x", "y", "unpaired", "bank_dir"});
    auto opt = [&](const char* k) -> std::optional<std::string> {
      if (!p.contains(k)) return std::nullopt;
      return get<std::string>(p, k, "paths", "");
    };
    c.paths = {opt("x"), opt("y"), opt("unpaired"), opt("bank_dir")};
  }
  if (j.contains("eval")) {
    const Json& e = j.at("eval");
    check_keys(e, "eval", {"ks", "bootstrap_reps", "distractors"});
    c.eval.ks = get_counts(e, "ks", "eval", c.eval.ks);
    c.eval.bootstrap_reps = get_count(e, "bootstrap_reps", "eval", 0);
    c.eval.distractors = get_count(e, "distractors", "eval", 0);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    usage("config: " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

Json to_json(const Architecture& arch) {
  return Json{{"hidden", arch.hidden},
              {"activation", arch.activation.name()},
              {"bias", {{"input", arch.bias.input}, {"hidden", arch.bias.hidden}}}};
}

Json to_json(const FitReport& r) {
  Json j{{"final_objective", r.final_objective},
         {"lambda_used", r.lambda_used},
         {"epochs_run", r.epochs_run},
         {"best_val_loss", r.best_val_loss ? Json(*r.best_val_loss) : Json(nullptr)},
         {"objective_trace", r.objective_trace}};
  if (r.selected_c) j["selected_c"] = *r.selected_c;
  return j;
}

std::string mean_pm_se(double mean, double se) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f\xC2\xB1%.3f", mean, se);
  return buf;
}

Json to_json(const EvalReport& r) {
  Json top = Json::object();
  for (const auto& [k, v] : r.topk_accuracy) top[std::to_string(k)] = v;
  Json j{{"n_test", r.n_test},
         {"clip_distance", r.clip_distance},
         {"clip_correlation", r.clip_correlation},
         {"topk_accuracy", top},
         {"mse", r.mse},
         {"r2", r.r2}};
  if (r.bootstrap_se) {
    Json se = Json::object();
    Json shown = Json::object();
    auto show = [&](const std::string& name, double value) {
      const auto it = r.bootstrap_se->find(name);
      if (it != r.bootstrap_se->end()) {
        se[name] = it->second;
        shown[name] = mean_pm_se(value, it->second);
      }
    };
    show("clip_distance", r.clip_distance);
    show("clip_correlation", r.clip_correlation);
    for (const auto& [k, v] : r.topk_accuracy) show("top" + std::to_string(k), v);
    show("mse", r.mse);
    show("r2", r.r2);
    j["bootstrap_se"] = se;
    j["summary"] = shown;
  } else {
    j["bootstrap_se"] = nullptr;
  }
  return j;
}

Json to_json(const DiagnosticsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"c_inv_hat", opt(r.c_inv_hat)}, {"c_inv_se", opt(r.c_inv_se)},
              {"c_aux_hat", opt(r.c_aux_hat)}, {"kappa_hat", opt(r.kappa_hat)},
              {"sigma_hat", r.sigma_hat},      {"mu", "not estimable"},
              {"notes", r.notes}};
}

Json to_json(const LassoResult& r) {
  return Json{{"gamma", std::vector<double>(r.gamma.data(), r.gamma.data() + r.gamma.size())},
              {"sweeps", r.sweeps},
              {"converged", r.converged},
              {"degenerate", r.degenerate},
              {"kkt_violation", r.kkt_violation},
              {"kkt_tol", r.kkt_tol},
              {"kkt_ok", r.kkt_ok}};
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace embalign::io
