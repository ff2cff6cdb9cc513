#include "helpers.hpp"

#include "embalign/bench_suites.hpp"
#include "embalign/error.hpp"
#include "embalign/gradient.hpp"
#include "embalign/lq.hpp"
#include "embalign/mlp.hpp"
#include "embalign/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <set>

using namespace embalign;
using testing::random_matrix;
using testing::random_net;

TEST_CASE("rng streams are reproducible and split independently of consumption") {
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  const auto child_before = c.split(7).next_u64();
  for (int i = 0; i < 5; ++i) c.next_u64();
  CHECK(c.split(7).next_u64() == child_before);
  CHECK(Rng(42).split(7).next_u64() != Rng(42).split(8).next_u64());
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));

  Rng u(3);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double x = u.uniform();
    CHECK((x >= 0.0 && x < 1.0));
    const double z = u.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / 20000) < 0.05);
  CHECK(std::abs(sq / 20000 - 1.0) < 0.05);

  auto perm = Rng(9).permutation(50);
  CHECK(std::set<std::size_t>(perm.begin(), perm.end()).size() == 50);
}

TEST_CASE("activations fix zero and parse by name") {
  for (const auto& a : {Activation::relu(), Activation::leaky_relu(0.2), Activation::tanh()}) {
    CHECK(a.apply(0.0) == 0.0);
    CHECK(Activation::parse(a.name()) == a);
  }
  CHECK(Activation::relu().apply(-3.0) == 0.0);
  CHECK(Activation::leaky_relu(0.2).apply(-1.0) == doctest::Approx(-0.2));
  CHECK_THROWS_AS(Activation::parse("sigmoid"), Error);
  CHECK_THROWS_AS(Activation::leaky_relu(1.5), Error);
}

TEST_CASE("forward: zero layers give zero") {
  const MlpParams p = MlpParams::zeros({3, 4, 2}, Activation::relu(), 2.0);
  const Vector x = Vector::Constant(3, 5.0);
  CHECK(forward(p, x).isZero(0.0));
}

TEST_CASE("forward: identity layers apply ReLU") {
  const MlpParams p = testing::identity_net(2, 2);
  Vector x(2);
  x << 1.0, -2.0;
  const Vector y = forward(p, x);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 0.0);
}

TEST_CASE("forward: hand-set 2x3x2 net matches a manual trace") {
  Matrix t0(3, 2), t1(2, 3);
  t0 << 1, -1, 0.5, 2, -1, 0;
  t1 << 1, 0, 2, -1, 1, 0.5;
  const MlpParams p({t0, t1}, Activation::relu(), 2.0);
  Vector x(2);
  x << 2.0, 1.0;
  // hidden pre-activation: [1, 3, -2] -> relu [1, 3, 0]
  const Vector y = forward(p, x);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(2.0));
}

TEST_CASE("MlpParams validates shapes, q and finiteness") {
  CHECK_THROWS_AS(MlpParams({Matrix::Ones(2, 3), Matrix::Ones(2, 3)}, Activation::relu(), 2.0), Error);
  CHECK_THROWS_AS(MlpParams({Matrix::Ones(2, 3)}, Activation::relu(), 2.5), Error);
  Matrix bad = Matrix::Ones(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(MlpParams({bad}, Activation::relu(), 2.0), Error);
  const MlpParams p = random_net({5, 7, 3}, 1);
  CHECK(p.depth() == 1);
  CHECK(p.p_total() == 5 * 7 + 7 * 3);
  CHECK(p_total_for(Architecture{{7}, Activation::relu(), {}}, 5, 3) == p.p_total());
  CHECK(p.is_feasible());
}

TEST_CASE("bias columns count toward layer shapes") {
  Architecture a;
  a.hidden = {4};
  a.bias = {true, true};
  CHECK(p_total_for(a, 3, 2) == 4 * 4 + 2 * 5);
  Rng rng(1);
  const MlpParams p = MlpParams::random_init(layer_dims(a, 3, 2), a.activation, 2.0, a.bias, 1.0, rng);
  const Matrix X = random_matrix(4, 3, 2);
  const Matrix out = forward_batch(p, X);
  CHECK(out.cols() == 2);
  CHECK(forward(p, Vector(X.row(1).transpose())).isApprox(out.row(1).transpose(), 0.0));
}

TEST_CASE("forward_batch agrees with per-row forward") {
  const MlpParams p = random_net({4, 6, 5, 3}, 2);
  CHECK(forward_batch(p, Matrix(0, 4)).rows() == 0);
  CHECK(forward_batch(p, Matrix(0, 4)).cols() == 3);
  const Matrix X = random_matrix(3, 4, 3);
  const Matrix Y = forward_batch(p, X);
  for (Eigen::Index i = 0; i < 3; ++i) {
    const Vector row = forward(p, Vector(X.row(i).transpose()));
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(Y(i, j) == row[j]);
  }
  CHECK_THROWS_AS(forward_batch(p, Matrix(2, 5)), Error);
}

TEST_CASE("entrywise lq norms") {
  Matrix a(1, 2), b(2, 2), c(1, 2);
  a << 3, 4;
  b << 1, -2, 3, 0;
  c << 1, 1;
  CHECK(entrywise_lq_norm(a, 2.0) == doctest::Approx(5.0));
  CHECK(entrywise_lq_norm(b, 1.0) == doctest::Approx(6.0));
  CHECK(entrywise_lq_norm(c, 1.5) == doctest::Approx(std::pow(2.0, 2.0 / 3.0)));
  CHECK(entrywise_lq_power(b, 1.0) == doctest::Approx(6.0));
  CHECK_THROWS_AS(entrywise_lq_norm(a, 0.5), Error);
}

TEST_CASE("operator norm estimate") {
  Matrix d(2, 2);
  d << 2, 0, 0, 1;
  CHECK(operator_norm_upper(d, 100) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(operator_norm_upper(Matrix::Zero(3, 3), 10) == 0.0);
  const Matrix W = random_matrix(4, 4, 11);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(W.transpose() * W));
  const double truth = std::sqrt(es.eigenvalues().maxCoeff());
  const double est = operator_norm_upper(W, 500);
  CHECK(est <= truth * (1 + 1e-12));
  CHECK(std::abs(est - truth) <= 1e-6);
}

TEST_CASE("lq ball projection examples") {
  Matrix inside(1, 2);
  inside << 0.3, 0.4;
  CHECK(project_lq_ball(inside, 1.5, 1.0) == inside);
  Matrix w(1, 2);
  w << 3, 4;
  const Matrix p2 = project_lq_ball(w, 2.0, 1.0);
  CHECK(p2(0, 0) == doctest::Approx(0.6));
  CHECK(p2(0, 1) == doctest::Approx(0.8));
  Matrix v(1, 2);
  v << 3, 1;
  const Matrix p1 = project_lq_ball(v, 1.0, 1.0);
  CHECK(p1(0, 0) == doctest::Approx(1.0));
  CHECK(p1(0, 1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(project_lq_ball(v, 1.0, 0.0), Error);
}

TEST_CASE("lq projection matches the bisection reference and is a projection") {
  Rng rng(17);
  for (int t = 0; t < 60; ++t) {
    const double q = (t % 3 == 0) ? 1.0 : (t % 3 == 1 ? 1.5 : 1.25);
    Matrix W(2, 3);
    for (auto& x : W.reshaped()) x = rng.uniform(-2, 2);
    const Matrix P = project_lq_ball(W, q, 0.7);
    CHECK(entrywise_lq_norm(P, q) <= 0.7 * (1 + 1e-9));
    Vector flat(6);
    for (int i = 0; i < 6; ++i) flat[i] = W.reshaped()(i);
    const Vector ref = bench::reference_projection(flat, q, 0.7);
    for (int i = 0; i < 6; ++i) CHECK(std::abs(P.reshaped()(i) - ref[i]) <= 1e-6);
    // Idempotent and non-expansive against another point.
    CHECK((project_lq_ball(P, q, 0.7) - P).cwiseAbs().maxCoeff() <= 1e-9);
    const Matrix W2 = W + 0.1 * Matrix::Ones(2, 3);
    CHECK((project_lq_ball(W2, q, 0.7) - P).norm() <= (W2 - W).norm() + 1e-9);
  }
}

TEST_CASE("prox of the lq^q penalty") {
  CHECK(prox_lq_scalar(0.5, 1.0, 0.2) == doctest::Approx(0.3));
  CHECK(prox_lq_scalar(-0.1, 1.0, 0.2) == 0.0);
  CHECK(prox_lq_scalar(1.0, 2.0, 0.5) == doctest::Approx(0.5));
  // q = 1.5: x + 0.15 sqrt(x) = 1, checked against a dense grid then bisection.
  const double x = prox_lq_scalar(1.0, 1.5, 0.1);
  double best = 0.0, best_val = 1e300;
  for (int i = 0; i <= 100000; ++i) {
    const double t = i / 100000.0;
    const double v = 0.5 * (t - 1.0) * (t - 1.0) + 0.1 * std::pow(t, 1.5);
    if (v < best_val) best_val = v, best = t;
  }
  double lo = std::max(0.0, best - 1e-5), hi = best + 1e-5;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (m + 0.15 * std::sqrt(m) - 1.0 > 0 ? hi : lo) = m;
  }
  CHECK(std::abs(x - 0.5 * (lo + hi)) <= 1e-8);
  CHECK(std::abs(x + 0.15 * std::sqrt(x) - 1.0) <= 1e-12);
  Matrix W(1, 3);
  W << -1.0, 0.0, 2.0;
  const Matrix P = prox_lq_power(W, 1.5, 0.1);
  CHECK(P(0, 0) == doctest::Approx(-x));
  CHECK(P(0, 1) == 0.0);
  CHECK(prox_lq_power(W, 1.5, 0.0) == W);
}

TEST_CASE("loss and gradient") {
  const MlpParams p = random_net({3, 5, 2}, 4);
  const Matrix X = random_matrix(6, 3, 5);
  const Matrix Y = forward_batch(p, X);
  const LossGrad lg = loss_and_grad(p, X, Y);
  CHECK(lg.loss == 0.0);
  for (const auto& g : lg.grads) CHECK(g.isZero(0.0));

  // Single linear layer: 2 (Theta X^T - Y^T) X / n.
  const Matrix T = random_matrix(2, 3, 6);
  const MlpParams lin({T}, Activation::relu(), 2.0);
  const Matrix Y2 = random_matrix(6, 2, 7);
  const LossGrad lg2 = loss_and_grad(lin, X, Y2);
  const Matrix closed = 2.0 * (X * T.transpose() - Y2).transpose() * X / 6.0;
  CHECK((lg2.grads[0] - closed).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(lg2.loss == doctest::Approx((X * T.transpose() - Y2).squaredNorm() / 6.0));

  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto act = s % 2 ? Activation::tanh() : Activation::leaky_relu(0.1);
    const MlpParams net = random_net({4, 5, 3, 2}, 100 + s, act, 1.5, -1.0);
    CHECK(bench::gradcheck_error(net, random_matrix(7, 4, 200 + s), random_matrix(7, 2, 300 + s), 1e-5) <= 1e-5);
  }
  CHECK_THROWS_AS(loss_and_grad(p, X, Matrix(6, 3)), Error);
}

TEST_CASE("v_infty") {
  Matrix X(2, 2);
  X << 1, -2, 0, 3;
  CHECK(v_infty(X) == doctest::Approx(std::sqrt(6.5)));
  CHECK(v_infty(Matrix::Zero(3, 2)) == 0.0);
  const Matrix R = random_matrix(100, 5, 8);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < 100; ++i) {
    double mx = 0.0;
    for (Eigen::Index j = 0; j < 5; ++j) mx = std::max(mx, std::abs(R(i, j)));
    acc += mx * mx;
  }
  CHECK(v_infty(R) == std::sqrt(acc / 100.0));
  CHECK_THROWS_AS(v_infty(Matrix(0, 3)), Error);
}
