#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "funcast/ar_garch.hpp"
#include "funcast/error.hpp"
#include "funcast/linalg.hpp"
#include "funcast/optim.hpp"

namespace funcast {

/// Scalar BEKK(1,1): H_i = C C' + a e_{i-1} e_{i-1}' + g H_{i-1}
struct SbekkFit {
  Mat c;        // J x J lower triangular
  double a = 0.0;
  double g = 0.0;
  std::vector<Mat> h_path;  // H_1..H_M, H_1 = sample covariance
  double loglik = 0.0;
  Mat sample_cov;
  Vec last_resid;
  bool variance_targeting = true;
  ConvergenceInfo info;
  std::vector<std::string> warnings;

  Mat cct() const { return c * c.transpose(); }
};

struct SbekkOptions {
  bool variance_targeting = true;
  optim::BfgsOptions bfgs{};
};

/// Gaussian log-likelihood of the residual rows under the sBEKK recursion.
/// Returns -inf as soon as any H_i fails a Cholesky factorisation.
inline double sbekk_loglik(const Mat& resid, const Mat& cct, double a, double g, const Mat& h1,
                           std::vector<Mat>* path = nullptr) {
  constexpr double log2pi = 1.8378770664093453;
  const Eigen::Index m = resid.rows();
  const Eigen::Index j = resid.cols();
  if (path) {
    path->clear();
    path->reserve(static_cast<std::size_t>(m));
  }
  Mat h = h1;
  double ll = 0.0;
  Eigen::LLT<Mat> llt(j);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i > 0) {
      const Vec e = resid.row(i - 1).transpose();
      h = cct + a * e * e.transpose() + g * h;
    }
    llt.compute(h);
    if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
    const Mat& l = llt.matrixLLT();
    double logdet = 0.0;
    for (Eigen::Index k = 0; k < j; ++k) {
      if (!(l(k, k) > 0.0)) return -std::numeric_limits<double>::infinity();
      logdet += 2.0 * std::log(l(k, k));
    }
    const Vec u = llt.matrixL().solve(resid.row(i).transpose());
    ll -= 0.5 * (static_cast<double>(j) * log2pi + logdet + u.squaredNorm());
    if (path) path->push_back(h);
  }
  return ll;
}

namespace detail {

inline std::pair<double, double> softmax_pair(double s1, double s2) {
  const double m = std::max({s1, s2, 0.0});
  const double e1 = std::exp(s1 - m), e2 = std::exp(s2 - m), e0 = std::exp(-m);
  const double z = e0 + e1 + e2;
  return {e1 / z, e2 / z};
}

inline Mat unpack_lower(const Vec& th, Eigen::Index offset, Eigen::Index j) {
  Mat c = Mat::Zero(j, j);
  Eigen::Index k = offset;
  for (Eigen::Index col = 0; col < j; ++col)
    for (Eigen::Index row = col; row < j; ++row) c(row, col) = row == col ? std::exp(th(k++)) : th(k++);
  return c;
}

inline void pack_lower(const Mat& c, Vec& th, Eigen::Index offset) {
  Eigen::Index k = offset;
  const Eigen::Index j = c.rows();
  for (Eigen::Index col = 0; col < j; ++col)
    for (Eigen::Index row = col; row < j; ++row) th(k++) = row == col ? std::log(c(row, col)) : c(row, col);
}

}  // namespace detail

/// Gaussian QMLE of sBEKK(1,1) on VAR residuals (second step of the two-step
/// estimator). With variance targeting C C' = (1 - a - g) * sample covariance.
inline SbekkFit fit_sbekk(const Mat& residuals, const SbekkOptions& opt = {}) {
  const Eigen::Index m = residuals.rows();
  const Eigen::Index j = residuals.cols();
  require(j >= 1 && m >= 2, ErrorCode::PreconditionViolation, "fit_sbekk needs at least 2 rows and 1 column");
  SbekkFit fit;
  fit.variance_targeting = opt.variance_targeting;
  if (m < 10 * j) fit.warnings.push_back("fewer than 10*J residual rows for sBEKK");
  const Vec col_mean = residuals.colwise().mean().transpose();
  const double col_scale = std::sqrt(residuals.cwiseAbs2().colwise().mean().maxCoeff());
  if (col_mean.cwiseAbs().maxCoeff() > 1e-6 * std::max(col_scale, 1e-300))
    fit.warnings.push_back("sBEKK residuals are not column-centred");

  fit.sample_cov = sample_covariance(residuals);
  const Mat& sigma = fit.sample_cov;
  const double inv_m = 1.0 / static_cast<double>(m);

  auto cct_of = [&](const Vec& th, double a, double g) -> Mat {
    if (opt.variance_targeting) return (1.0 - a - g) * sigma;
    const Mat c = detail::unpack_lower(th, 2, j);
    return c * c.transpose();
  };
  const optim::ValueOnly f = [&](const Vec& th) {
    const auto [a, g] = detail::softmax_pair(th(0), th(1));
    const double ll = sbekk_loglik(residuals, cct_of(th, a, g), a, g, sigma);
    return std::isfinite(ll) ? -inv_m * ll : std::numeric_limits<double>::infinity();
  };

  const Eigen::Index n_par = opt.variance_targeting ? 2 : 2 + j * (j + 1) / 2;
  constexpr std::array<std::array<double, 2>, 3> starts{{{0.05, 0.90}, {0.10, 0.80}, {0.03, 0.95}}};
  optim::OptimResult best;
  int used = 0;
  for (const auto& [a0, g0] : starts) {
    Vec th0(n_par);
    const double rest = 1.0 - a0 - g0;
    th0(0) = std::log(a0 / rest);
    th0(1) = std::log(g0 / rest);
    if (!opt.variance_targeting) {
      Eigen::LLT<Mat> llt(rest * sigma);
      if (llt.info() != Eigen::Success) continue;
      detail::pack_lower(llt.matrixL(), th0, 2);
    }
    ++used;
    auto r = optim::minimize_bfgs(optim::with_numeric_gradient(f, 1e-6), th0, opt.bfgs);
    if (std::isfinite(r.value) && (!std::isfinite(best.value) || r.value < best.value)) best = std::move(r);
  }
  require(std::isfinite(best.value), ErrorCode::NonPsdH, "no feasible sBEKK parameter point");

  const auto [a, g] = detail::softmax_pair(best.x(0), best.x(1));
  fit.a = a;
  fit.g = g;
  const Mat cct = cct_of(best.x, a, g);
  // H_1 passed Cholesky and 1 - a - g > 0, so C C' is positive definite here
  fit.c = Eigen::LLT<Mat>(cct).matrixL();
  fit.loglik = sbekk_loglik(residuals, cct, a, g, sigma, &fit.h_path);
  fit.last_resid = residuals.row(m - 1).transpose();
  fit.info = {best.iterations, best.grad.lpNorm<Eigen::Infinity>(), used, best.converged};
  if (!best.converged) fit.warnings.push_back("sBEKK optimiser hit its iteration limit");
  return fit;
}

/// One-step conditional covariance C C' + a e e' + g H.
inline Mat forecast_sbekk(const SbekkFit& fit, const Vec& last_resid, const Mat& last_h) {
  Mat h = fit.cct() + fit.a * last_resid * last_resid.transpose() + fit.g * last_h;
  return 0.5 * (h + h.transpose());
}

inline Mat forecast_sbekk(const SbekkFit& fit) { return forecast_sbekk(fit, fit.last_resid, fit.h_path.back()); }

}  // namespace funcast
