// Serial reference vs OpenMP kernels on alignment-sized inputs.

#include "embalign/kernels.hpp"
#include "embalign/rng.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace embalign;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix M(r, c);
  for (auto& v : M.reshaped()) v = rng.normal();
  return M;
}

MlpParams net(std::size_t d, std::size_t h, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  return MlpParams::random_init({d, h, m}, Activation::relu(), 2.0, {}, 1.0, rng);
}

template <Matrix (*F)(const MlpParams&, const Matrix&)>
void BM_forward(benchmark::State& st) {
  const auto n = st.range(0);
  const MlpParams p = net(256, 128, 64, 1);
  const Matrix X = random_matrix(n, 256, 2);
  for (auto _ : st) benchmark::DoNotOptimize(F(p, X));
  st.SetItemsProcessed(st.iterations() * n);
}

template <LossGrad (*F)(const MlpParams&, const Matrix&, const Matrix&)>
void BM_loss_grad(benchmark::State& st) {
  const auto n = st.range(0);
  const MlpParams p = net(256, 128, 64, 1);
  const Matrix X = random_matrix(n, 256, 2);
  const Matrix Y = random_matrix(n, 64, 3);
  for (auto _ : st) benchmark::DoNotOptimize(F(p, X, Y));
  st.SetItemsProcessed(st.iterations() * n);
}

template <double (*F)(const Matrix&, const Matrix&)>
void BM_clip_correlation(benchmark::State& st) {
  const auto n = st.range(0);
  const Matrix P = random_matrix(n, 64, 4);
  const Matrix T = random_matrix(n, 64, 5);
  for (auto _ : st) benchmark::DoNotOptimize(F(P, T));
}

template <std::vector<Matrix> (*F)(std::span<const MlpParams>, const Matrix&)>
void BM_source_predictions(benchmark::State& st) {
  std::vector<MlpParams> bank;
  for (std::uint64_t k = 0; k < 8; ++k) bank.push_back(net(64, 64, 32, 10 + k));
  const Matrix X = random_matrix(st.range(0), 64, 6);
  for (auto _ : st) benchmark::DoNotOptimize(F(bank, X));
}

BENCHMARK(BM_forward<kernels::serial::forward_batch>)->Name("forward/serial")->Arg(1024)->Arg(8192);
BENCHMARK(BM_forward<kernels::parallel::forward_batch>)->Name("forward/parallel")->Arg(1024)->Arg(8192);
BENCHMARK(BM_loss_grad<kernels::serial::loss_and_grad>)->Name("loss_grad/serial")->Arg(1024)->Arg(8192);
BENCHMARK(BM_loss_grad<kernels::parallel::loss_and_grad>)->Name("loss_grad/parallel")->Arg(1024)->Arg(8192);
BENCHMARK(BM_clip_correlation<kernels::serial::clip_correlation>)->Name("clip_correlation/serial")->Arg(1000);
BENCHMARK(BM_clip_correlation<kernels::parallel::clip_correlation>)->Name("clip_correlation/parallel")->Arg(1000);
BENCHMARK(BM_source_predictions<kernels::serial::source_predictions>)->Name("source_predictions/serial")->Arg(2048);
BENCHMARK(BM_source_predictions<kernels::parallel::source_predictions>)->Name("source_predictions/parallel")->Arg(2048);

}  // namespace

BENCHMARK_MAIN();
