#include "helpers.hpp"

#include "embalign/diagnostics.hpp"
#include "embalign/io/json_io.hpp"

#include <algorithm>

using namespace embalign;

namespace {

bool has_note(const DiagnosticsReport& r, const std::string& needle) {
  return std::any_of(r.notes.begin(), r.notes.end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

WorldSpec linear_world() {
  WorldSpec s;
  s.d = 4;
  s.m = 3;
  s.sigma = 0.3;
  Rng rng(1);
  s.truth = random_linear_gaussian(4, 3, 1.0, 1.0, 0.5, rng);
  s.seed = 2;
  return s;
}

WorldSpec subject_world(double delta) {
  WorldSpec s;
  s.d = 5;
  s.m = 3;
  MlpTruth t;
  t.arch.hidden = {4};
  s.truth = t;
  MultiSubjectSpec ms;
  ms.K = 4;
  ms.s_star = 2;
  ms.residual_scale = delta;
  s.subjects = ms;
  s.seed = 3;
  return s;
}

}  // namespace

TEST_CASE("perfect inverse gives c_inv near zero") {
  const GeneratedWorld w = generate(linear_world(), 500, 0, 10);
  const Matrix G = inverse_oracle(w);
  const MlpParams lin({G}, Activation::relu(), 2.0);
  const MlpParams fwd({Matrix::Zero(3, 4)}, Activation::relu(), 2.0);
  const IslModel isl{lin, fwd, fwd, {}, 500, 0, {}, {}, {}};
  const DiagnosticsReport r = run_diagnostics(w, &isl, 4000);
  REQUIRE(r.c_inv_hat);
  REQUIRE(r.c_inv_se);
  CHECK(*r.c_inv_hat <= 3.0 * *r.c_inv_se + 1e-15);
  CHECK(r.sigma_hat == doctest::Approx(0.3).epsilon(0.1));
  CHECK(has_note(r, "not estimable"));
  CHECK(has_note(r, "no source bank"));
}

TEST_CASE("c_inv is reported with a note when unavailable") {
  const GeneratedWorld w = generate(subject_world(0.0), 100, 0, 1);
  const DiagnosticsReport r = run_diagnostics(w, nullptr, 100);
  CHECK_FALSE(r.c_inv_hat);
  CHECK(has_note(r, "no fitted inverse"));
}

TEST_CASE("no residual means no auxiliary error") {
  const GeneratedWorld w = generate(subject_world(0.0), 500, 0, 1);
  const DiagnosticsReport r = run_diagnostics(w, nullptr, 0);
  REQUIRE(r.c_aux_hat);
  CHECK(*r.c_aux_hat == 0.0);
  REQUIRE(r.kappa_hat);
  CHECK(*r.kappa_hat > 0.0);
  const GeneratedWorld w2 = generate(subject_world(0.5), 500, 0, 1);
  CHECK(*run_diagnostics(w2, nullptr, 0).c_aux_hat > 0.0);
}

TEST_CASE("duplicated support sources collapse kappa") {
  GeneratedWorld w = generate(subject_world(0.0), 500, 0, 1);
  const auto& S = w.subjects->support;
  REQUIRE(S.size() == 2);
  w.bank->models[S[1]] = w.bank->models[S[0]];
  const DiagnosticsReport r = run_diagnostics(w, nullptr, 0);
  REQUIRE(r.kappa_hat);
  CHECK(*r.kappa_hat <= 1e-10);
  CHECK(has_note(r, "collinear"));
  const io::Json j = io::to_json(r);
  CHECK(j.at("c_inv_hat").is_null());
  CHECK(j.at("mu") == "not estimable");
}
