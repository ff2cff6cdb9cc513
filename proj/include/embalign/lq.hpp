#pragma once

// Entry-wise lq geometry of weight matrices: norms, ball projection and the
// proximal map of the lq^q penalty, for q in [1, 2].

#include "embalign/types.hpp"

#include <cstddef>

namespace embalign {

/// (sum_ij |w_ij|^q)^(1/q). Throws DomainError unless q in [1, 2].
double entrywise_lq_norm(const Matrix& W, double q);

/// sum_ij |w_ij|^q, i.e. the penalty ||W||_q^q.
double entrywise_lq_power(const Matrix& W, double q);

/// Power iteration on W^T W from a fixed pseudo-random start. The Rayleigh
/// quotient never exceeds the true spectral norm, so the estimate is a lower
/// bound that tightens with iters.
double operator_norm_upper(const Matrix& W, std::size_t iters);

/// Euclidean projection onto {X : ||X||_q <= radius}.
///   q = 1: sort-and-threshold onto the l1 ball.
///   q = 2: radial rescale.
///   otherwise: bisection on the KKT multiplier mu with a safeguarded scalar
///   Newton solve of t + mu q t^(q-1) = |w| per entry.
/// Inputs already inside the ball (within 1e-12 relative) are returned as is.
Matrix project_lq_ball(const Matrix& W, double q, double radius);

/// Entry-wise prox of scale * |.|^q:
///   argmin_x 0.5 (x - w)^2 + scale |x|^q.
Matrix prox_lq_power(const Matrix& W, double q, double scale);

/// Scalar versions of the above; exposed for tests and the projection.
double prox_lq_scalar(double w, double q, double scale);

/// sqrt(n^-1 sum_i ||X_i||_inf^2). Throws DomainError on an empty matrix.
double v_infty(const Matrix& X);

}  // namespace embalign
