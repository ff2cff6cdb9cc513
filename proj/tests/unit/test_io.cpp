#include "helpers.hpp"

#include "embalign/error.hpp"
#include "embalign/io/csv.hpp"
#include "embalign/io/emb1.hpp"
#include "embalign/io/json_io.hpp"
#include "embalign/io/mdl1.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include <unistd.h>

using namespace embalign;
using testing::random_matrix;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path p = fs::temp_directory_path() / ("embalign_io_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Usage;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected an error");
  return {};
}

void reseal(std::string& bytes) {
  const std::uint64_t h = io::fnv1a(std::string_view(bytes).substr(0, bytes.size() - 8));
  std::memcpy(bytes.data() + bytes.size() - 8, &h, 8);
}

}  // namespace

TEST_CASE("EMB1 round trip") {
  const Matrix M = testing::round_to_float(random_matrix(3, 5, 1));
  const fs::path f = temp_dir() / "m.emb";
  io::write_embeddings(f, M);
  CHECK(fs::file_size(f) == 16 + 3 * 5 * 4);
  CHECK(bit_equal(io::read_embeddings(f), M));
  const std::string bytes = io::encode_embeddings(M);
  CHECK(bytes.substr(0, 4) == "EMB1");
  CHECK(io::encode_embeddings(io::decode_embeddings(bytes)) == bytes);
  CHECK(io::decode_embeddings(io::encode_embeddings(Matrix(0, 4))).cols() == 4);
}

TEST_CASE("EMB1 errors") {
  const std::string good = io::encode_embeddings(random_matrix(3, 5, 2));
  const std::string truncated = good.substr(0, good.size() - 4);
  CHECK(kind_of([&] { io::decode_embeddings(truncated); }) == ErrorKind::Format);
  const std::string msg = message_of([&] { io::decode_embeddings(truncated); });
  CHECK(msg.find("60") != std::string::npos);
  CHECK(msg.find("56") != std::string::npos);
  std::string magic = good;
  magic[0] = 'X';
  CHECK(message_of([&] { io::decode_embeddings(magic); }).find("byte 0") != std::string::npos);
  std::string version = good;
  version[4] = 2;
  CHECK(message_of([&] { io::decode_embeddings(version); }).find("byte 4") != std::string::npos);
  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 16 + 4 * 7, &q, 4);
  CHECK(kind_of([&] { io::decode_embeddings(nan); }) == ErrorKind::Data);
  Matrix inf = random_matrix(2, 2, 3);
  inf(1, 1) = 1e300;
  CHECK(kind_of([&] { io::encode_embeddings(inf); }) == ErrorKind::Data);
  CHECK(kind_of([&] { io::read_embeddings("/nonexistent/file.emb"); }) == ErrorKind::Usage);
}

TEST_CASE("MDL1 round trip") {
  for (const auto& act : {Activation::relu(), Activation::leaky_relu(0.05), Activation::tanh()}) {
    const MlpParams p = testing::random_net({4, 6, 3}, 5, act, 1.5);
    const fs::path f = temp_dir() / "p.mdl";
    io::write_model(f, p);
    const MlpParams back = io::read_model(f);
    CHECK(back == p);
    CHECK(io::encode_model(back) == io::encode_model(p));
    CHECK(io::model_digest(back) == io::model_digest(p));
  }
  Rng rng(6);
  const MlpParams b = MlpParams::random_init({3, 4, 2}, Activation::relu(), 2.0, {true, false}, 1.0, rng);
  const std::string bytes = io::encode_model(b);
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  CHECK(version == 2);
  CHECK(io::decode_model(bytes) == b);
  const std::string plain = io::encode_model(testing::random_net({3, 2}, 7));
  std::memcpy(&version, plain.data() + 4, 4);
  CHECK(version == 1);
}

TEST_CASE("MDL1 corruption") {
  const std::string good = io::encode_model(testing::random_net({4, 6, 3}, 8));
  std::string flipped = good;
  flipped[60] ^= 0x01;
  CHECK(kind_of([&] { io::decode_model(flipped); }) == ErrorKind::Format);
  CHECK(message_of([&] { io::decode_model(flipped); }).find("digest mismatch") != std::string::npos);
  std::string magic = good;
  magic[1] = 'X';
  CHECK(message_of([&] { io::decode_model(magic); }).find("byte 0") != std::string::npos);
  CHECK(kind_of([&] { io::decode_model(good.substr(0, good.size() - 3)); }) == ErrorKind::Format);
  CHECK(kind_of([&] { io::decode_model(good + "x"); }) == ErrorKind::Format);
  // A NaN weight with a valid digest is a data error.
  std::string nan = good;
  const double q = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan.data() + nan.size() - 16, &q, 8);
  reseal(nan);
  CHECK(kind_of([&] { io::decode_model(nan); }) == ErrorKind::Data);
}

TEST_CASE("CSV import") {
  const Matrix M = io::parse_csv("a,b,c\n1,2,3\n4.5, -6 ,7e-1\n\n");
  REQUIRE(M.rows() == 2);
  CHECK(M(1, 0) == 4.5);
  CHECK(M(1, 1) == -6.0);
  CHECK(M(1, 2) == 0.7);
  CHECK(io::parse_csv("1,2\r\n3,4\r\n").rows() == 2);
  CHECK(kind_of([] { io::parse_csv("1,2\n3\n"); }) == ErrorKind::Data);
  CHECK(message_of([] { io::parse_csv("1,2\n3,x\n"); }).find("line 2") != std::string::npos);
  CHECK(kind_of([] { io::parse_csv("1,nan\n"); }) == ErrorKind::Data);
}

TEST_CASE("run config parsing") {
  const io::Json j = io::Json::parse(R"({
    "method": "isl", "seed": 7,
    "architecture": {"hidden": [16], "activation": "leaky_relu:0.1"},
    "inverse_architecture": {"hidden": [8, 4]},
    "train": {"lambda": {"mode": "theory", "c": 0.2}, "epochs": 12, "q": 1.5},
    "world": {"d": 6, "m": 3, "sigma": 0.2, "n": 50, "N": 100, "n_test": 20,
              "truth": {"kind": "mlp", "hidden": [4], "input_scale": 2.0},
              "unpaired": {"kind": "adversarial", "shift_scale": 2.0}},
    "eval": {"ks": [1, 5], "bootstrap_reps": 10}
  })");
  const io::RunConfig c = io::parse_run_config(j);
  CHECK(c.method == io::Method::Isl);
  CHECK(*c.seed == 7);
  CHECK(c.architecture.hidden == std::vector<std::size_t>{16});
  CHECK(c.architecture.activation == Activation::leaky_relu(0.1));
  CHECK(c.inverse_architecture->hidden.size() == 2);
  CHECK(std::get<TheoryRate>(c.train.lambda_mode).c == 0.2);
  CHECK(c.train.epochs == 12);
  CHECK(c.train.q == 1.5);
  REQUIRE(c.world);
  CHECK(c.world->spec.seed == 7);
  CHECK(c.world->N == 100);
  CHECK(std::get<Adversarial>(c.world->spec.unpaired).shift_scale == 2.0);
  CHECK(c.eval.ks == std::vector<std::size_t>{1, 5});

  const io::Json fixed = io::Json::parse(R"({"train": {"lambda": {"mode": "fixed", "value": 0.5}}})");
  CHECK(std::get<FixedLambda>(io::parse_run_config(fixed).train.lambda_mode).lambda == 0.5);

  const io::Json lin = io::Json::parse(R"({"world": {"d": 2, "m": 1,
      "truth": {"kind": "linear", "A": [[1, 2]], "sigma_x": [[1, 0], [0, 1]]}}})");
  CHECK(std::get<LinearGaussian>(io::parse_run_config(lin).world->spec.truth).A(0, 1) == 2.0);
}

TEST_CASE("run config strictness") {
  auto bad = [](const char* text) {
    try {
      io::parse_run_config(io::Json::parse(text));
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Usage);
      return std::string(e.what());
    }
    FAIL("expected a usage error for " << text);
    return std::string();
  };
  CHECK(bad(R"({"metod": "isl"})").find("'metod'") != std::string::npos);
  CHECK(bad(R"({"train": {"epochz": 3}})").find("'train.epochz'") != std::string::npos);
  CHECK(bad(R"({"train": {"lambda": {"mode": "fixed"}}})").find("train.lambda.value") != std::string::npos);
  CHECK(bad(R"({"train": {"epochs": "many"}})").find("train.epochs") != std::string::npos);
  CHECK(bad(R"({"train": {"epochs": 0}})").find("epochs") != std::string::npos);
  CHECK(bad(R"({"method": "magic"})").find("method") != std::string::npos);
  CHECK(bad(R"({"architecture": {"hidden": [0]}})").find("architecture.hidden") != std::string::npos);
  CHECK(bad(R"({"world": {"d": 2, "m": 1, "truth": {"kind": "mlp", "depth": 3}}})").find("world.truth.depth") != std::string::npos);
  CHECK(bad(R"({"world": {"d": 2, "m": 1, "truth": {"kind": "linear", "A": [[1, 2]], "sigma_x": [[1, 0], [0, -1]]}}})").find("world") != std::string::npos);
  CHECK(bad(R"({"seed": -1})").find("seed") != std::string::npos);
  CHECK(bad(R"({"paths": {"x": "a", "z": "b"}})").find("paths.z") != std::string::npos);
}

TEST_CASE("report serialization is stable") {
  FitReport r;
  r.lambda_used = 0.25;
  r.objective_trace = {3.0, 2.0};
  r.best_val_loss = 1.5;
  const io::Json j = io::to_json(r);
  CHECK(j.at("lambda_used") == 0.25);
  CHECK(j.at("objective_trace").size() == 2);
  CHECK(io::dump(j) == io::dump(io::to_json(r)));
  CHECK(io::dump(j).back() == '\n');
  const Architecture a{{3}, Activation::tanh(), {true, false}};
  CHECK(io::parse_architecture(io::to_json(a), "x").hidden == a.hidden);
  CHECK(io::parse_architecture(io::to_json(a), "x").bias == a.bias);
}
