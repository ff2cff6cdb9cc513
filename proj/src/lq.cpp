#include "embalign/lq.hpp"

#include "embalign/error.hpp"
#include "embalign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace embalign {
namespace {

void check_q(double q) {
  if (!(q >= 1.0 && q <= 2.0)) throw_domain("q must lie in [1, 2], got " + std::to_string(q));
}

void check_finite(const Matrix& W, const char* op) {
  if (!W.allFinite()) throw_numeric(std::string(op) + ": non-finite entries");
}

// Root t >= 0 of t + mu q t^(q-1) = a for a >= 0, mu >= 0, q in (1, 2).
// The left side is increasing and concave in t, so Newton from the right
// overshoots left at most once; a bisection bracket catches that.
double solve_shrink(double a, double mu, double q) {
  if (a <= 0.0) return 0.0;
  if (mu <= 0.0) return a;
  double lo = 0.0;
  double hi = a;
  double t = a;
  for (int it = 0; it < 200; ++it) {
    const double tq1 = std::pow(t, q - 1.0);
    const double phi = t + mu * q * tq1 - a;
    if (phi > 0.0) hi = t; else lo = t;
    if (std::abs(phi) <= 1e-16 * a || hi - lo <= 1e-16 * a) break;
    const double dphi = 1.0 + mu * q * (q - 1.0) * tq1 / t;
    double next = t - phi / dphi;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == t) break;
    t = next;
  }
  return t;
}

Matrix project_l1(const Matrix& W, double radius) {
  const Eigen::Index n = W.size();
  std::vector<double> mags(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) mags[static_cast<std::size_t>(i)] = std::abs(W.data()[i]);
  std::sort(mags.begin(), mags.end(), std::greater<>());
  // Largest rho with mags[rho] > (cumsum_rho - radius) / (rho + 1).
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t k = 0; k < mags.size(); ++k) {
    cumsum += mags[k];
    const double candidate = (cumsum - radius) / static_cast<double>(k + 1);
    if (mags[k] > candidate) tau = candidate;
  }
  tau = std::max(tau, 0.0);
  Matrix out(W.rows(), W.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = W.data()[i];
    const double mag = std::max(std::abs(w) - tau, 0.0);
    out.data()[i] = mag > 0.0 ? std::copysign(mag, w) : 0.0;
  }
  return out;
}

Matrix project_general(const Matrix& W, double q, double radius) {
  const Eigen::Index n = W.size();
  const double target = std::pow(radius, q);
  auto power_at = [&](double mu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      s += std::pow(solve_shrink(std::abs(W.data()[i]), mu, q), q);
    }
    return s;
  };
  // Bracket the multiplier: power_at(mu_hi) <= target.
  double mu_lo = 0.0;
  double mu_hi = 1.0;
  double s_hi = power_at(mu_hi);
  while (s_hi > target) {
    mu_lo = mu_hi;
    mu_hi *= 2.0;
    if (mu_hi > 1e300) throw_numeric("project_lq_ball: multiplier bracket diverged");
    s_hi = power_at(mu_hi);
  }
  // Stop once the feasible end of the bracket meets the constraint to 1e-10
  // (relative): the remaining dual gap is mu * (target - s_hi).
  for (int it = 0; it < 200; ++it) {
    if (target - s_hi <= 1e-10 * target) break;
    const double mid = 0.5 * (mu_lo + mu_hi);
    if (!(mid > mu_lo && mid < mu_hi)) break;
    const double s = power_at(mid);
    if (s > target) {
      mu_lo = mid;
    } else {
      mu_hi = mid;
      s_hi = s;
    }
  }
  Matrix out(W.rows(), W.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = W.data()[i];
    out.data()[i] = std::copysign(solve_shrink(std::abs(w), mu_hi, q), w);
  }
  return out;
}

}  // namespace

double entrywise_lq_power(const Matrix& W, double q) {
  check_q(q);
  if (q == 1.0) return W.cwiseAbs().sum();
  if (q == 2.0) return W.squaredNorm();
  double s = 0.0;
  for (Eigen::Index i = 0; i < W.size(); ++i) s += std::pow(std::abs(W.data()[i]), q);
  return s;
}

double entrywise_lq_norm(const Matrix& W, double q) {
  check_q(q);
  if (q == 1.0) return W.cwiseAbs().sum();
  if (q == 2.0) return W.norm();
  return std::pow(entrywise_lq_power(W, q), 1.0 / q);
}

double operator_norm_upper(const Matrix& W, std::size_t iters) {
  if (iters == 0) throw_domain("operator_norm_upper: iters must be >= 1");
  if (W.size() == 0) return 0.0;
  Rng rng(0x5EED0F0B5ULL);
  Vector v(W.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  v.normalize();
  double estimate = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    const Vector u = W * v;
    const double un = u.norm();
    if (un == 0.0) return 0.0;
    Vector next = W.transpose() * u;
    const double nn = next.norm();
    if (nn == 0.0) return 0.0;
    const double prev = estimate;
    estimate = un;  // ||W v|| with ||v|| = 1: never above the top singular value
    v = next / nn;
    if (it > 0 && std::abs(estimate - prev) <= 1e-15 * estimate) break;
  }
  return (W * v).norm();
}

Matrix project_lq_ball(const Matrix& W, double q, double radius) {
  check_q(q);
  if (!(radius > 0.0)) throw_domain("project_lq_ball: radius must be positive");
  check_finite(W, "project_lq_ball");
  const double norm = entrywise_lq_norm(W, q);
  if (norm <= radius * (1.0 + 1e-12)) return W;
  if (q == 2.0) return W * (radius / norm);
  if (q == 1.0) return project_l1(W, radius);
  return project_general(W, q, radius);
}

double prox_lq_scalar(double w, double q, double scale) {
  if (scale <= 0.0) return w;
  if (q == 1.0) {
    const double mag = std::max(std::abs(w) - scale, 0.0);
    return mag > 0.0 ? std::copysign(mag, w) : 0.0;
  }
  if (q == 2.0) return w / (1.0 + 2.0 * scale);
  return std::copysign(solve_shrink(std::abs(w), scale, q), w);
}

Matrix prox_lq_power(const Matrix& W, double q, double scale) {
  check_q(q);
  if (!(scale >= 0.0)) throw_domain("prox_lq_power: scale must be >= 0");
  if (scale == 0.0) return W;
  if (q == 2.0) return W / (1.0 + 2.0 * scale);
  Matrix out(W.rows(), W.cols());
  for (Eigen::Index i = 0; i < W.size(); ++i) out.data()[i] = prox_lq_scalar(W.data()[i], q, scale);
  return out;
}

double v_infty(const Matrix& X) {
  if (X.rows() == 0) throw_domain("v_infty: empty matrix");
  double s = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double mx = X.cols() == 0 ? 0.0 : X.row(i).cwiseAbs().maxCoeff();
    s += mx * mx;
  }
  return std::sqrt(s / static_cast<double>(X.rows()));
}

}  // namespace embalign
