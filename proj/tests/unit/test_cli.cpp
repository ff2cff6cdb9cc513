#include "helpers.hpp"

#include "embalign/cli.hpp"
#include "embalign/io/emb1.hpp"
#include "embalign/io/json_io.hpp"
#include "embalign/io/mdl1.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

using namespace embalign;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("embalign_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

const char* kWorldConfig = R"({
  "method": "baseline", "seed": 11,
  "architecture": {"hidden": [6]},
  "train": {"epochs": 5},
  "world": {"d": 5, "m": 3, "sigma": 0.1, "n": 80, "N": 40, "n_test": 30,
            "truth": {"kind": "mlp", "hidden": [4], "input_scale": 2.0}}
})";

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"fit"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  const fs::path d = scratch("usage");
  const auto cfg = write_text(d / "c.json", R"({"method": "baseline", "trian": {}})");
  const Run r = cli({"fit", "--config", cfg.string(), "--out", (d / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("'trian'") != std::string::npos);
  CHECK(io::Json::parse(r.err).at("error").at("kind") == "usage");
  CHECK(r.out.empty());
  CHECK(cli({"fit", "--config", (d / "missing.json").string(), "--out", d.string()}).code == 1);
  CHECK(cli({"bench", "--suite", "nope"}).code == 1);
  CHECK(cli({"fit", "--config", cfg.string(), "--out", d.string(), "--seed", "abc"}).code == 1);
}

TEST_CASE("fit on a generated world is byte-reproducible") {
  const fs::path d = scratch("repro");
  const auto cfg = write_text(d / "c.json", kWorldConfig);
  REQUIRE(cli({"fit", "--config", cfg.string(), "--out", (d / "a").string()}).code == 0);
  REQUIRE(cli({"fit", "--config", cfg.string(), "--out", (d / "b").string()}).code == 0);
  for (const char* f : {"model.mdl", "fit_report.json"}) CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
  REQUIRE(cli({"fit", "--config", cfg.string(), "--out", (d / "c").string(), "--seed", "12"}).code == 0);
  CHECK(slurp(d / "a" / "model.mdl") != slurp(d / "c" / "model.mdl"));
  const io::Json rep = io::Json::parse(slurp(d / "a" / "fit_report.json"));
  CHECK(rep.at("seed") == 11);
  CHECK(rep.at("test").at("n_test") == 30);
  CHECK(rep.contains("diagnostics"));
}

TEST_CASE("seed precedence: flag, then config, then ALIGN_SEED") {
  const fs::path d = scratch("seed");
  const auto with = write_text(d / "with.json", kWorldConfig);
  io::Json j = io::Json::parse(kWorldConfig);
  j.erase("seed");
  const auto without = write_text(d / "without.json", j.dump());
  ::setenv("ALIGN_SEED", "99", 1);
  REQUIRE(cli({"fit", "--config", with.string(), "--out", (d / "a").string()}).code == 0);
  REQUIRE(cli({"fit", "--config", without.string(), "--out", (d / "b").string()}).code == 0);
  REQUIRE(cli({"fit", "--config", without.string(), "--out", (d / "c").string(), "--seed", "5"}).code == 0);
  ::unsetenv("ALIGN_SEED");
  CHECK(io::Json::parse(slurp(d / "a" / "fit_report.json")).at("seed") == 11);
  CHECK(io::Json::parse(slurp(d / "b" / "fit_report.json")).at("seed") == 99);
  CHECK(io::Json::parse(slurp(d / "c" / "fit_report.json")).at("seed") == 5);
}

TEST_CASE("gen-world, file-based ISL fit without unpaired data, predict and eval") {
  const fs::path d = scratch("files");
  const auto wcfg = write_text(d / "w.json", R"({"d": 4, "m": 3, "sigma": 0.1, "n": 60, "N": 0, "n_test": 25,
      "truth": {"kind": "linear_random", "a_norm": 1.0, "signal_scale": 1.0, "nuisance_scale": 0.3}})");
  REQUIRE(cli({"gen-world", "--config", wcfg.string(), "--seed", "3", "--out", (d / "w").string()}).code == 0);
  const io::Json manifest = io::Json::parse(slurp(d / "w" / "manifest.json"));
  CHECK(manifest.at("truth") == "linear");
  CHECK(io::read_embeddings(d / "w" / "X.emb").rows() == 60);
  CHECK(io::read_embeddings(d / "w" / "unpaired.emb").rows() == 0);

  const auto fcfg = write_text(d / "f.json", R"({"method": "isl", "seed": 1, "train": {"epochs": 5},
      "paths": {"x": ")" + (d / "w" / "X.emb").string() + R"(", "y": ")" + (d / "w" / "Y.emb").string() + R"("}})");
  const Run fit = cli({"fit", "--config", fcfg.string(), "--out", (d / "m").string()});
  REQUIRE(fit.code == 0);
  const io::Json rep = io::Json::parse(slurp(d / "m" / "fit_report.json"));
  CHECK(rep.at("N") == 0);
  CHECK(rep.at("notes").dump().find("ISL (0)") != std::string::npos);
  CHECK_FALSE(rep.contains("test"));

  REQUIRE(cli({"predict", "--model", (d / "m").string(), "--x", (d / "w" / "test_X.emb").string(),
               "--out", (d / "pred.emb").string()}).code == 0);
  const Matrix pred = io::read_embeddings(d / "pred.emb");
  const Matrix X = io::read_embeddings(d / "w" / "test_X.emb");
  const Matrix expect = testing::round_to_float(forward_batch(io::read_model(d / "m" / "augmented.mdl"), X) +
                                                forward_batch(io::read_model(d / "m" / "residual.mdl"), X));
  CHECK(bit_equal(pred, expect));

  const Run ev = cli({"eval", "--pred", (d / "pred.emb").string(), "--truth", (d / "w" / "test_Y.emb").string(),
                      "--bootstrap", "20", "--seed", "4", "--out", (d / "eval.json").string()});
  REQUIRE(ev.code == 0);
  const io::Json er = io::Json::parse(slurp(d / "eval.json"));
  CHECK(er.at("n_test") == 25);
  CHECK(er.at("summary").at("clip_distance").get<std::string>().find("\xC2\xB1") != std::string::npos);
}

TEST_CASE("predict with the identity model applies ReLU") {
  const fs::path d = scratch("identity");
  io::write_model(d / "id.mdl", testing::identity_net(3, 2));
  Matrix X(2, 3);
  X << 1, -2, 0.5, -1, 4, -0.25;
  io::write_embeddings(d / "x.emb", X);
  REQUIRE(cli({"predict", "--model", (d / "id.mdl").string(), "--x", (d / "x.emb").string(),
               "--out", (d / "y.emb").string()}).code == 0);
  CHECK(bit_equal(io::read_embeddings(d / "y.emb"), X.cwiseMax(0.0)));
}

TEST_CASE("mtl fit on a multi-subject world and prediction through the saved bank") {
  const fs::path d = scratch("mtl");
  const auto cfg = write_text(d / "c.json", R"({"method": "mtl", "seed": 2,
      "architecture": {"hidden": [4]}, "train": {"epochs": 5},
      "world": {"d": 5, "m": 3, "n": 120, "n_test": 20,
                "truth": {"kind": "mlp", "hidden": [4], "input_scale": 3.0},
                "subjects": {"K": 4, "s_star": 2, "residual_scale": 0.0}}})");
  REQUIRE(cli({"fit", "--config", cfg.string(), "--out", (d / "m").string()}).code == 0);
  REQUIRE(cli({"gen-world", "--config", cfg.string(), "--out", (d / "w").string()}).code == 0);
  CHECK(fs::exists(d / "m" / "bank" / "bank.json"));
  CHECK(slurp(d / "m" / "bank" / "source_0.mdl") == slurp(d / "w" / "bank" / "source_0.mdl"));
  REQUIRE(cli({"predict", "--model", (d / "m").string(), "--x", (d / "w" / "test_X.emb").string(),
               "--out", (d / "p.emb").string()}).code == 0);
  const io::Json rep = io::Json::parse(slurp(d / "m" / "fit_report.json"));
  CHECK(rep.at("gamma").size() == 4);
  // A different bank is refused.
  fs::remove(d / "w" / "bank" / "source_1.mdl");
  fs::copy_file(d / "w" / "bank" / "source_2.mdl", d / "w" / "bank" / "source_1.mdl");
  const Run bad = cli({"predict", "--model", (d / "m").string(), "--bank", (d / "w" / "bank").string(),
                       "--x", (d / "w" / "test_X.emb").string(), "--out", (d / "q.emb").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("integrity") != std::string::npos);
}

TEST_CASE("data and numeric failures map to exit codes 2 and 3") {
  const fs::path d = scratch("codes");
  write_text(d / "broken.emb", "EMB1garbage");
  const Run r = cli({"predict", "--model", (d / "none.mdl").string(), "--x", (d / "broken.emb").string(),
                     "--out", (d / "o.emb").string()});
  CHECK(r.code == 2);
  CHECK(io::Json::parse(r.err).at("error").at("kind") == "format");

  io::write_embeddings(d / "x.emb", 100.0 * testing::random_matrix(40, 3, 1));
  io::write_embeddings(d / "y.emb", testing::random_matrix(40, 2, 2));
  const auto cfg = write_text(d / "c.json", R"({"train": {"learning_rate": 100.0, "enforce_constraint": false,
      "val_fraction": 0.0, "lambda": {"mode": "fixed", "value": 0.0}},
      "paths": {"x": ")" + (d / "x.emb").string() + R"(", "y": ")" + (d / "y.emb").string() + R"("}})");
  const Run n = cli({"fit", "--config", cfg.string(), "--out", (d / "o").string()});
  CHECK(n.code == 3);
  CHECK(io::Json::parse(n.err).at("error").at("kind") == "numeric");
}

TEST_CASE("import-csv") {
  const fs::path d = scratch("csv");
  write_text(d / "a.csv", "x,y\n1,2\n3,4\n5,6\n");
  REQUIRE(cli({"import-csv", "--in", (d / "a.csv").string(), "--out", (d / "a.emb").string()}).code == 0);
  const Matrix M = io::read_embeddings(d / "a.emb");
  CHECK(M.rows() == 3);
  CHECK(M(2, 1) == 6.0);
  write_text(d / "b.csv", "1,2\n3\n");
  CHECK(cli({"import-csv", "--in", (d / "b.csv").string(), "--out", (d / "b.emb").string()}).code == 2);
}

TEST_CASE("bench emits one line per replication and a summary") {
  const Run r = cli({"bench", "--suite", "gradcheck", "--seeds", "6", "--jobs", "2"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::vector<io::Json> lines;
  while (std::getline(in, line)) lines.push_back(io::Json::parse(line));
  REQUIRE(lines.size() == 7);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(lines[i].at("suite") == "gradcheck");
    CHECK(lines[i].at("rep") == i);
    CHECK(lines[i].contains("seed"));
    CHECK(lines[i].contains("method"));
  }
  CHECK(lines.back().at("verdict") == "pass");
  CHECK(cli({"bench", "--suite", "gradcheck", "--seeds", "6", "--jobs", "1"}).out == r.out);
}

TEST_CASE("the installed binary reports exit codes") {
  const std::string bin = EMBALIGN_CLI_PATH;
  CHECK(WEXITSTATUS(std::system((bin + " bench --suite gradcheck --seeds 2 > /dev/null").c_str())) == 0);
  CHECK(WEXITSTATUS(std::system((bin + " nonsense 2> /dev/null").c_str())) == 1);
}
