#include "helpers.hpp"

#include "embalign/error.hpp"
#include "embalign/lq.hpp"
#include "embalign/mtl.hpp"
#include "embalign/synth.hpp"

#include <cmath>

using namespace embalign;

namespace {

WorldSpec mlp_spec(std::uint64_t seed, double sigma = 0.1) {
  WorldSpec s;
  s.d = 5;
  s.m = 3;
  s.sigma = sigma;
  MlpTruth t;
  t.arch.hidden = {6};
  t.input_scale = 2.0;
  s.truth = t;
  s.seed = seed;
  return s;
}

WorldSpec linear_spec(std::uint64_t seed, double sigma = 0.5) {
  WorldSpec s;
  s.d = 4;
  s.m = 3;
  s.sigma = sigma;
  Rng rng = Rng(seed).split(1);
  s.truth = random_linear_gaussian(4, 3, 2.0, 1.5, 0.5, rng);
  s.seed = seed;
  return s;
}

WorldSpec subject_spec(std::uint64_t seed, std::size_t K, std::size_t s_star, double delta) {
  WorldSpec s = mlp_spec(seed);
  MultiSubjectSpec ms;
  ms.K = K;
  ms.s_star = s_star;
  ms.residual_scale = delta;
  s.subjects = ms;
  return s;
}

}  // namespace

TEST_CASE("world spec validation") {
  WorldSpec s = mlp_spec(1);
  CHECK_NOTHROW(s.validate());
  s.d = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  WorldSpec l = linear_spec(1);
  std::get<LinearGaussian>(l.truth).sigma_x(0, 0) = -1.0;
  CHECK_THROWS_AS(l.validate(), Error);
  WorldSpec sub = linear_spec(1);
  sub.subjects = MultiSubjectSpec{};
  CHECK_THROWS_AS(sub.validate(), Error);
  WorldSpec big = subject_spec(1, 2, 3, 0.0);
  CHECK_THROWS_AS(big.validate(), Error);
}

TEST_CASE("noiseless and empty worlds") {
  const GeneratedWorld w = generate(mlp_spec(2, 0.0), 50, 10, 20);
  CHECK(bit_equal(w.paired.Y, w.truth.evaluate(w.paired.X)));
  CHECK(bit_equal(w.test.Y, w.test_clean));
  const GeneratedWorld e = generate(mlp_spec(2), 0, 0, 5);
  CHECK(e.paired.n() == 0);
  CHECK(e.paired.X.cols() == 5);
  CHECK(e.paired.Y.cols() == 3);
  CHECK(e.unpaired.n() == 0);
}

TEST_CASE("generation is deterministic and the paired sample ignores N") {
  const GeneratedWorld a = generate(mlp_spec(3), 40, 0, 10);
  const GeneratedWorld b = generate(mlp_spec(3), 40, 100, 10);
  CHECK(bit_equal(a.paired.X, b.paired.X));
  CHECK(bit_equal(a.paired.Y, b.paired.Y));
  CHECK(bit_equal(a.test.X, b.test.X));
  const GeneratedWorld c = generate(mlp_spec(3), 40, 100, 10);
  CHECK(bit_equal(b.unpaired.Y, c.unpaired.Y));
  CHECK_FALSE(bit_equal(generate(mlp_spec(4), 40, 0, 10).paired.X, a.paired.X));
}

TEST_CASE("mlp truth is feasible and inputs are bounded") {
  const GeneratedWorld w = generate(mlp_spec(5), 200, 0, 1);
  REQUIRE(w.truth.nets.size() == 1);
  CHECK(w.truth.nets[0].is_feasible(1.0, 1e-9));
  CHECK(w.paired.X.cwiseAbs().maxCoeff() <= 2.0);
}

TEST_CASE("linear-Gaussian joint covariance matches the analytic one") {
  const WorldSpec spec = linear_spec(6);
  const GeneratedWorld w = generate(spec, 50000, 0, 1);
  const auto& lin = std::get<LinearGaussian>(spec.truth);
  const Eigen::Index d = 4, m = 3;
  Eigen::MatrixXd S(d + m, d + m);
  S.topLeftCorner(d, d) = lin.sigma_x;
  S.topRightCorner(d, m) = lin.sigma_x * lin.A.transpose();
  S.bottomLeftCorner(m, d) = lin.A * lin.sigma_x;
  S.bottomRightCorner(m, m) = lin.A * lin.sigma_x * lin.A.transpose() +
                              spec.sigma * spec.sigma * Eigen::MatrixXd::Identity(m, m);
  Eigen::MatrixXd Z(50000, d + m);
  Z << w.paired.X, w.paired.Y;
  const Eigen::MatrixXd C = (Z.transpose() * Z) / 50000.0;
  for (Eigen::Index i = 0; i < d + m; ++i) {
    for (Eigen::Index j = 0; j < d + m; ++j) {
      const double scale = std::sqrt(S(i, i) * S(j, j));
      CHECK(std::abs(C(i, j) - S(i, j)) <= 0.05 * scale);
    }
  }
}

TEST_CASE("adversarial unpaired responses are shifted and independent") {
  WorldSpec s = mlp_spec(7);
  s.unpaired = Adversarial{3.0};
  const GeneratedWorld w = generate(s, 200, 4000, 1);
  const Vector mean_u = w.unpaired.Y.colwise().mean();
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(mean_u[j] - 0.3) <= 0.1);
  WorldSpec t = s;
  t.unpaired = Informative{};
  const GeneratedWorld wi = generate(t, 200, 4000, 1);
  const Vector mean_i = wi.unpaired.Y.colwise().mean();
  const Vector mean_p = generate(t, 4000, 0, 1).paired.Y.colwise().mean();
  CHECK((mean_i - mean_p).cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("oracle MSE") {
  const GeneratedWorld w = generate(linear_spec(8), 10, 0, 10);
  const auto exact = oracle_mse([&](const Matrix& X) { return w.truth.evaluate(X); }, w, 1000);
  CHECK(exact.value == 0.0);
  const auto zero = oracle_mse([&](const Matrix& X) { return Matrix(Matrix::Zero(X.rows(), 3)); }, w, 20000);
  const auto& lin = std::get<LinearGaussian>(w.spec.truth);
  const double second_moment = (lin.A * lin.sigma_x * lin.A.transpose()).trace();
  CHECK(std::abs(zero.value - second_moment) <= 3.0 * zero.se);
  const auto big = oracle_mse([&](const Matrix& X) { return Matrix(Matrix::Zero(X.rows(), 3)); }, w, 80000);
  CHECK(zero.se / big.se == doctest::Approx(2.0).epsilon(0.1));
  const auto z2 = oracle_mse([&](const Matrix& X) { return Matrix(Matrix::Zero(X.rows(), 3)); }, w, 40000);
  CHECK(zero.se / z2.se == doctest::Approx(std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("inverse oracle") {
  WorldSpec id;
  id.d = 3;
  id.m = 3;
  id.sigma = 1e-4;
  id.truth = LinearGaussian{Matrix::Identity(3, 3), Matrix::Identity(3, 3)};
  const GeneratedWorld wi = generate(id, 1, 0, 1);
  CHECK((inverse_oracle(wi) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-6);

  const GeneratedWorld w = generate(linear_spec(9), 200000, 0, 1);
  const Matrix G = inverse_oracle(w);
  const auto self = inverse_error([&](const Matrix& Y) { return Matrix(Y * G.transpose()); }, w, 5000);
  CHECK(self.value <= 3.0 * self.se + 1e-15);
  // Large-sample regression of X on Y.
  const Matrix& X = w.paired.X;
  const Matrix& Y = w.paired.Y;
  const Matrix B = (Y.transpose() * Y).ldlt().solve(Y.transpose() * X);
  const double mse_oracle = (X - Y * G.transpose()).squaredNorm() / X.rows();
  const double mse_reg = (X - Y * B).squaredNorm() / X.rows();
  CHECK(std::abs(mse_oracle - mse_reg) <= 0.01 * mse_reg);
  CHECK_THROWS_AS(inverse_oracle(generate(mlp_spec(1), 1, 0, 1)), Error);
}

TEST_CASE("multi-subject worlds") {
  SUBCASE("one source with unit weight and no residual is the target") {
    WorldSpec s = subject_spec(10, 3, 1, 0.0);
    s.subjects->gamma_star = Vector::Unit(3, 0);
    const GeneratedWorld w = generate(s, 100, 0, 1);
    REQUIRE(w.bank);
    const Matrix diff = w.truth.evaluate(w.paired.X) - forward_batch(w.bank->models[0], w.paired.X);
    CHECK(diff.cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("without residual the weighted bank reproduces the target") {
    const GeneratedWorld w = generate(subject_spec(11, 5, 2, 0.0), 10, 0, 1);
    REQUIRE(w.subjects);
    CHECK(w.subjects->support.size() == 2);
    CHECK(w.subjects->c_aux == 0.0);
    const Vector g = w.subjects->gamma_star;
    const auto est = oracle_mse(
        [&](const Matrix& X) { return aggregate(source_predictions(*w.bank, X), g); }, w, 2000);
    CHECK(est.value <= 1e-20);
  }
  SUBCASE("random support draws are well conditioned") {
    int positive = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const GeneratedWorld w = generate(subject_spec(100 + seed, 8, 2, 0.1), 2000, 0, 1);
      positive += restricted_eigen_diag(*w.bank, w.paired.X, w.subjects->support) > 0.0;
    }
    CHECK(positive >= 19);
  }
}

TEST_CASE("random feasible nets sit on the ball boundary") {
  Rng rng(12);
  const MlpParams p = random_feasible_net({4, 6, 3}, Architecture{{6}, Activation::relu(), {}}, 1.5, rng);
  for (const auto& W : p.layers()) CHECK(entrywise_lq_norm(W, 1.5) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("random linear-Gaussian truth") {
  Rng rng(13);
  const LinearGaussian lg = random_linear_gaussian(6, 2, 3.0, 2.0, 0.1, rng);
  CHECK(lg.A.norm() == doctest::Approx(3.0));
  // Signal variance on the row space of A, nuisance elsewhere.
  const Eigen::MatrixXd P = lg.A.transpose() * (lg.A * lg.A.transpose()).inverse() * lg.A;
  CHECK((P * lg.sigma_x * P).trace() == doctest::Approx(2 * 4.0).epsilon(1e-9));
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(6, 6) - P;
  CHECK((Q * lg.sigma_x * Q).trace() == doctest::Approx(4 * 0.01).epsilon(1e-9));
}
