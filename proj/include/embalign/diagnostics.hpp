#pragma once

// Reportable proxies for the assumption constants on synthetic worlds.

#include "embalign/isl.hpp"
#include "embalign/mtl.hpp"
#include "embalign/synth.hpp"

#include <optional>
#include <string>
#include <vector>

namespace embalign {

struct DiagnosticsReport {
  /// E||g_hat(Y) - g*(Y)||^2 and its Monte Carlo standard error.
  std::optional<double> c_inv_hat;
  std::optional<double> c_inv_se;
  /// E||delta f_res(X)||^2 recorded when the bank was built.
  std::optional<double> c_aux_hat;
  /// Smallest restricted eigenvalue of the source Gram on the true support.
  std::optional<double> kappa_hat;
  /// Root mean square of Y - f*(X) over the paired rows.
  double sigma_hat = 0.0;
  std::vector<std::string> notes;
};

/// Absent fields come with a note explaining why; this never throws for
/// unsupported combinations.
DiagnosticsReport run_diagnostics(const GeneratedWorld& world, const IslModel* isl,
                                  std::size_t n_mc);

}  // namespace embalign
