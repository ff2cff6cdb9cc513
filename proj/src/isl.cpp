#include "embalign/isl.hpp"

#include "embalign/error.hpp"
#include "embalign/lq.hpp"

#include <string>
#include <utility>

namespace embalign {
namespace {

std::size_t cols(const Matrix& M) { return static_cast<std::size_t>(M.cols()); }
std::size_t rows(const Matrix& M) { return static_cast<std::size_t>(M.rows()); }

template <typename F>
auto annotate(int step, const char* name, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    throw Error(e.kind(), "isl step " + std::to_string(step) + " (" + name + "): " + e.what());
  }
}

}  // namespace

FitResult fit_inverse(const PairedDataset& data, const Architecture& arch, const TrainConfig& cfg) {
  data.validate();
  if (data.n() < 2) throw_domain("fit_inverse: need n >= 2");
  const auto p_total = p_total_for(arch, data.m(), data.d());
  const RateInputs rate{v_infty(data.Y),
                        static_cast<double>(data.n()) * static_cast<double>(data.d()) *
                            static_cast<double>(p_total),
                        data.n()};
  return fit_with_rate(data.Y, data.X, arch, cfg, rate);
}

Matrix make_pseudo_predictors(const MlpParams& inverse, const UnpairedResponses& Yu) {
  if (cols(Yu.Y) != inverse.input_dim()) {
    throw_shape("pseudo-predictors: unpaired responses have " + std::to_string(Yu.Y.cols()) +
                " columns, inverse expects " + std::to_string(inverse.input_dim()));
  }
  return forward_batch(inverse, Yu.Y);
}

FitResult fit_augmented(const PairedDataset& data, const Matrix& pseudo,
                        const UnpairedResponses& Yu, const Architecture& arch,
                        const TrainConfig& cfg) {
  data.validate();
  if (pseudo.rows() != Yu.Y.rows()) {
    throw_shape("fit_augmented: " + std::to_string(pseudo.rows()) + " pseudo-predictors for " +
                std::to_string(Yu.Y.rows()) + " unpaired responses");
  }
  const std::size_t N = rows(pseudo);
  if (N > 0 && (cols(pseudo) != data.d() || cols(Yu.Y) != data.m())) {
    throw_shape("fit_augmented: unpaired block does not match the paired dimensions");
  }
  Matrix X(data.n() + N, data.d());
  Matrix Y(data.n() + N, data.m());
  X.topRows(data.X.rows()) = data.X;
  Y.topRows(data.Y.rows()) = data.Y;
  if (N > 0) {
    X.bottomRows(pseudo.rows()) = pseudo;
    Y.bottomRows(Yu.Y.rows()) = Yu.Y;
  }
  if (X.rows() == 0) throw_domain("fit_augmented: no rows");
  const auto p_total = p_total_for(arch, data.d(), data.m());
  const std::size_t pooled = data.n() + N;
  const RateInputs rate{v_infty(X),
                        static_cast<double>(pooled) * static_cast<double>(data.m()) *
                            static_cast<double>(p_total),
                        pooled};
  return fit_with_rate(X, Y, arch, cfg, rate, data.n());
}

FitResult fit_residual(const PairedDataset& data, const MlpParams& augmented,
                       const Architecture& arch, const TrainConfig& cfg) {
  data.validate();
  if (data.n() < 2) throw_domain("fit_residual: need n >= 2");
  const Matrix R = data.Y - forward_batch(augmented, data.X);
  const auto p_total = p_total_for(arch, data.d(), data.m());
  const RateInputs rate{v_infty(data.X),
                        static_cast<double>(data.n()) * static_cast<double>(data.m()) *
                            static_cast<double>(p_total),
                        data.n()};
  return fit_with_rate(data.X, R, arch, cfg, rate);
}

IslModel fit_isl(const PairedDataset& data, const UnpairedResponses& Yu,
                 const IslArchitectures& archs, const TrainConfig& cfg) {
  data.validate();
  if (data.n() == 0) throw_domain("fit_isl: empty paired data");

  FitResult inv = annotate(1, "inverse", [&] { return fit_inverse(data, archs.inverse, step_config(cfg, 1)); });
  FitResult aug = annotate(2, "augmented", [&] {
    const Matrix pseudo = make_pseudo_predictors(inv.params, Yu);
    return fit_augmented(data, pseudo, Yu, archs.augmented, step_config(cfg, 2));
  });
  FitResult res = annotate(3, "residual", [&] {
    return fit_residual(data, aug.params, archs.residual, step_config(cfg, 3));
  });

  IslModel model{std::move(inv.params), std::move(aug.params), std::move(res.params),
                 {inv.report.lambda_used, aug.report.lambda_used, res.report.lambda_used},
                 data.n(), Yu.n(),
                 std::move(inv.report), std::move(aug.report), std::move(res.report)};
  return model;
}

Matrix predict_isl(const IslModel& model, const Matrix& X) {
  Matrix out = forward_batch(model.augmented, X);
  out += forward_batch(model.residual, X);
  return out;
}

}  // namespace embalign
