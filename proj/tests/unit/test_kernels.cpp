#include "helpers.hpp"

#include "embalign/kernels.hpp"

#include <omp.h>

using namespace embalign;
using testing::random_matrix;
using testing::random_net;

namespace {

void check_close(const Matrix& a, const Matrix& b, double rel) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  CHECK((a - b).cwiseAbs().maxCoeff() <= rel * (1.0 + a.cwiseAbs().maxCoeff()));
}

}  // namespace

TEST_CASE("parallel forward_batch equals the serial reference bit-exactly") {
  const MlpParams p = random_net({16, 32, 8}, 1);
  for (Eigen::Index n : {0, 1, 63, 64, 65, 300}) {
    const Matrix X = random_matrix(n, 16, 2 + static_cast<std::uint64_t>(n));
    CHECK(bit_equal(kernels::parallel::forward_batch(p, X), kernels::serial::forward_batch(p, X)));
  }
}

TEST_CASE("parallel loss_and_grad matches serial; exactly within one chunk") {
  const MlpParams p = random_net({6, 10, 4}, 3, Activation::tanh());
  for (Eigen::Index n : {1, 64, 500}) {
    const Matrix X = random_matrix(n, 6, 4);
    const Matrix Y = random_matrix(n, 4, 5);
    const LossGrad a = kernels::parallel::loss_and_grad(p, X, Y);
    const LossGrad b = kernels::serial::loss_and_grad(p, X, Y);
    if (n <= static_cast<Eigen::Index>(kernels::kReduceChunk)) {
      CHECK(a.loss == b.loss);
      for (std::size_t l = 0; l < a.grads.size(); ++l) CHECK(bit_equal(a.grads[l], b.grads[l]));
    } else {
      CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
      for (std::size_t l = 0; l < a.grads.size(); ++l) check_close(a.grads[l], b.grads[l], 1e-12);
    }
  }
}

TEST_CASE("parallel reductions do not depend on the thread count") {
  const MlpParams p = random_net({6, 10, 4}, 3);
  const Matrix X = random_matrix(1000, 6, 4);
  const Matrix Y = random_matrix(1000, 4, 5);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const LossGrad one = kernels::parallel::loss_and_grad(p, X, Y);
  const double mse_one = kernels::parallel::mean_sq_error(X, X * 0.5);
  omp_set_num_threads(4);
  const LossGrad four = kernels::parallel::loss_and_grad(p, X, Y);
  const double mse_four = kernels::parallel::mean_sq_error(X, X * 0.5);
  omp_set_num_threads(saved);
  CHECK(one.loss == four.loss);
  CHECK(mse_one == mse_four);
  for (std::size_t l = 0; l < one.grads.size(); ++l) CHECK(bit_equal(one.grads[l], four.grads[l]));
}

TEST_CASE("mean_sq_error and clip_correlation agree across implementations") {
  const Matrix P = random_matrix(200, 5, 6);
  const Matrix T = random_matrix(200, 5, 7);
  CHECK(kernels::parallel::mean_sq_error(P, T) == doctest::Approx(kernels::serial::mean_sq_error(P, T)).epsilon(1e-13));
  CHECK(kernels::parallel::clip_correlation(P, T) == kernels::serial::clip_correlation(P, T));
}

TEST_CASE("source_predictions agree across implementations") {
  std::vector<MlpParams> bank;
  for (std::uint64_t k = 0; k < 3; ++k) bank.push_back(random_net({4, 6, 2}, 10 + k));
  const Matrix X = random_matrix(70, 4, 9);
  const auto a = kernels::parallel::source_predictions(bank, X);
  const auto b = kernels::serial::source_predictions(bank, X);
  REQUIRE(a.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(bit_equal(a[k], b[k]));
}
