#include "embalign/diagnostics.hpp"

#include "embalign/error.hpp"

#include <cmath>

namespace embalign {

DiagnosticsReport run_diagnostics(const GeneratedWorld& world, const IslModel* isl,
                                  std::size_t n_mc) {
  DiagnosticsReport r;
  r.notes.push_back("mu (local quadratic growth) is not estimable from data; not reported");

  if (world.paired.n() > 0) {
    const Matrix e = world.paired.Y - world.truth.evaluate(world.paired.X);
    r.sigma_hat = std::sqrt(e.squaredNorm() / static_cast<double>(e.size()));
  } else {
    r.notes.push_back("sigma_hat: no paired rows, reported as 0");
  }

  const bool linear = std::holds_alternative<LinearGaussian>(world.spec.truth) && !world.spec.subjects;
  if (!isl) {
    r.notes.push_back("c_inv_hat: no fitted inverse supplied");
  } else if (!linear) {
    r.notes.push_back("c_inv_hat: the true inverse has a closed form only in linear-Gaussian worlds");
  } else if (n_mc == 0) {
    r.notes.push_back("c_inv_hat: n_mc = 0");
  } else {
    const MlpParams& inverse = isl->inverse;
    const McEstimate est = inverse_error([&](const Matrix& Y) { return forward_batch(inverse, Y); },
                                         world, n_mc);
    r.c_inv_hat = est.value;
    r.c_inv_se = est.se;
  }

  if (world.subjects && world.bank) {
    r.c_aux_hat = world.subjects->c_aux;
    if (world.subjects->support.empty()) {
      r.notes.push_back("kappa_hat: true support is empty");
    } else if (world.paired.n() == 0) {
      r.notes.push_back("kappa_hat: no paired rows");
    } else {
      r.kappa_hat = std::max(0.0, restricted_eigen_diag(*world.bank, world.paired.X, world.subjects->support));
      if (*r.kappa_hat <= 1e-10) {
        r.notes.push_back("kappa_hat: source predictions on the true support are collinear");
      }
    }
  } else {
    r.notes.push_back("c_aux_hat, kappa_hat: world has no source bank");
  }
  return r;
}

}  // namespace embalign
