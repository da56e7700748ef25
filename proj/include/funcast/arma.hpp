#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "funcast/error.hpp"
#include "funcast/linalg.hpp"
#include "funcast/optim.hpp"

namespace funcast {

/// y_t = intercept + sum_i ar_i y_{t-i} + e_t + sum_j ma_j e_{t-j}
struct ArmaFit {
  int p = 0;
  int q = 0;
  Vec ar_coefs;
  Vec ma_coefs;
  double intercept = 0.0;
  double innov_var = 0.0;
  Vec residuals;   // N; zero over the conditioning prefix
  Vec series;      // copy of the fitted data, needed for forecasting
  int conditioning = 0;
  double loglik = 0.0;
  double aicc = 0.0;
  bool fallback = false;  // AR(1) least squares used because no grid cell converged
  std::vector<std::string> warnings;
};

/// Maps partial autocorrelations in (-1,1) to the coefficients of a stationary
/// AR polynomial (Durbin-Levinson recursion).
inline Vec pacf_to_ar(const Vec& partial) {
  const Eigen::Index k = partial.size();
  Vec phi = Vec::Zero(k);
  for (Eigen::Index m = 0; m < k; ++m) {
    Vec next = phi;
    next(m) = partial(m);
    for (Eigen::Index j = 0; j < m; ++j) next(j) = phi(j) - partial(m) * phi(m - 1 - j);
    phi = next;
  }
  return phi;
}

namespace detail {

/// Conditional innovations of an ARMA model starting at index `start`.
inline double arma_css(const Vec& y, double c, const Vec& ar, const Vec& ma, Eigen::Index start, Vec* resid) {
  const Eigen::Index n = y.size();
  Vec e = Vec::Zero(n);
  double ssr = 0.0;
  for (Eigen::Index t = start; t < n; ++t) {
    double pred = c;
    for (Eigen::Index i = 0; i < ar.size(); ++i) pred += ar(i) * y(t - 1 - i);
    for (Eigen::Index j = 0; j < ma.size(); ++j)
      if (t - 1 - j >= 0) pred += ma(j) * e(t - 1 - j);
    e(t) = y(t) - pred;
    ssr += e(t) * e(t);
  }
  if (resid) *resid = std::move(e);
  return ssr;
}

struct ArmaCell {
  double intercept;
  Vec ar, ma;
  double ssr;
  bool converged;
};

inline std::optional<ArmaCell> fit_arma_cell(const Vec& z, int p, int q, int start) {
  const double n_eff = static_cast<double>(z.size() - start);
  auto unpack = [p, q](const Vec& th, double& c, Vec& ar, Vec& ma) {
    c = th(0);
    ar = pacf_to_ar(th.segment(1, p).array().tanh().matrix());
    // invertible MA(q) is the negated stationary AR(q) map
    ma = -pacf_to_ar(th.segment(1 + p, q).array().tanh().matrix());
  };
  const optim::ValueOnly f = [&](const Vec& th) {
    double c;
    Vec ar, ma;
    unpack(th, c, ar, ma);
    const double ssr = arma_css(z, c, ar, ma, start, nullptr);
    return 0.5 * std::log(ssr / n_eff);
  };
  Vec th0 = Vec::Zero(1 + p + q);
  optim::BfgsOptions bo;
  bo.max_iter = 300;
  bo.grad_tol = 1e-7;
  const auto r = optim::minimize_bfgs(optim::with_numeric_gradient(f, 1e-6), th0, bo);
  if (!std::isfinite(r.value)) return std::nullopt;
  ArmaCell cell;
  unpack(r.x, cell.intercept, cell.ar, cell.ma);
  cell.ssr = arma_css(z, cell.intercept, cell.ar, cell.ma, start, nullptr);
  cell.converged = r.converged;
  return cell;
}

}  // namespace detail

struct ArmaOptions {
  int p_max = 2;
  int q_max = 2;
};

/// Conditional Gaussian MLE over the (p, q) grid, orders chosen by AICc. All
/// cells condition on the same first max(p_max, 1) observations so that their
/// likelihoods are comparable.
inline ArmaFit fit_arma_auto(const Vec& series, const ArmaOptions& opt = {}) {
  const Eigen::Index n = series.size();
  require(n >= 30, ErrorCode::PreconditionViolation, "fit_arma_auto needs at least 30 observations");
  require(opt.p_max >= 0 && opt.q_max >= 0, ErrorCode::PreconditionViolation, "orders must be nonnegative");
  const double mean = series.mean();
  const double var = sample_variance(series);
  require(var > 1e-14 * std::max(1.0, mean * mean), ErrorCode::DegenerateSeries,
          "series has zero sample variance");
  const double scale = std::sqrt(var);
  const Vec z = (series.array() - mean) / scale;
  const int start = std::max(opt.p_max, 1);
  const double n_eff = static_cast<double>(n - start);

  ArmaFit best;
  double best_aicc = std::numeric_limits<double>::infinity();
  for (int p = 0; p <= opt.p_max; ++p) {
    for (int q = 0; q <= opt.q_max; ++q) {
      const auto cell = detail::fit_arma_cell(z, p, q, start);
      if (!cell || !cell->converged || !(cell->ssr > 0.0)) continue;
      const double sigma2 = cell->ssr / n_eff;
      const double ll = -0.5 * n_eff * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0);
      const double k = p + q + 2.0;
      const double aicc = -2.0 * ll + 2.0 * k + 2.0 * k * (k + 1.0) / std::max(1.0, n_eff - k - 1.0);
      if (aicc < best_aicc) {
        best_aicc = aicc;
        best.p = p;
        best.q = q;
        best.ar_coefs = cell->ar;
        best.ma_coefs = cell->ma;
        best.intercept = cell->intercept;
        best.innov_var = sigma2;
        best.loglik = ll;
        best.aicc = aicc;
      }
    }
  }

  if (!std::isfinite(best_aicc)) {
    // AR(1) by least squares on the standardised series
    const Vec lag = z.head(n - 1), cur = z.tail(n - 1);
    const double lm = lag.mean(), cm = cur.mean();
    const double sxx = (lag.array() - lm).square().sum();
    const double a = sxx > 0.0 ? ((lag.array() - lm) * (cur.array() - cm)).sum() / sxx : 0.0;
    best.p = 1;
    best.q = 0;
    best.ar_coefs = Vec::Constant(1, a);
    best.ma_coefs = Vec();
    best.intercept = cm - a * lm;
    best.fallback = true;
    best.warnings.push_back("no ARMA grid cell converged; AR(1) least-squares fallback");
  }

  // back to the original scale
  const double ar_sum = best.ar_coefs.sum();
  best.intercept = mean * (1.0 - ar_sum) + scale * best.intercept;
  best.conditioning = start;
  best.series = series;
  const double ssr = detail::arma_css(series, best.intercept, best.ar_coefs, best.ma_coefs, start, &best.residuals);
  best.innov_var = ssr / n_eff;
  best.loglik = -0.5 * n_eff * (std::log(2.0 * std::numbers::pi * best.innov_var) + 1.0);
  const double k = best.p + best.q + 2.0;
  best.aicc = -2.0 * best.loglik + 2.0 * k + 2.0 * k * (k + 1.0) / std::max(1.0, n_eff - k - 1.0);
  return best;
}

/// Iterated point forecasts for steps 1..horizon; future innovations are zero.
inline Vec forecast_arma(const ArmaFit& fit, int horizon = 1) {
  const Eigen::Index n = fit.series.size();
  std::vector<double> y(fit.series.data(), fit.series.data() + n);
  std::vector<double> e(fit.residuals.data(), fit.residuals.data() + n);
  Vec out(horizon);
  for (int h = 0; h < horizon; ++h) {
    const std::size_t t = y.size();
    double pred = fit.intercept;
    for (Eigen::Index i = 0; i < fit.ar_coefs.size(); ++i) pred += fit.ar_coefs(i) * y[t - 1 - static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < fit.ma_coefs.size(); ++j) pred += fit.ma_coefs(j) * e[t - 1 - static_cast<std::size_t>(j)];
    y.push_back(pred);
    e.push_back(0.0);
    out(h) = pred;
  }
  return out;
}

/// In-sample one-step predictions y_t - e_t; the conditioning prefix gets the sample mean.
inline Vec arma_fitted(const ArmaFit& fit) {
  Vec f = fit.series - fit.residuals;
  const double m = fit.series.mean();
  for (int t = 0; t < fit.conditioning && t < f.size(); ++t) f(t) = m;
  return f;
}

}  // namespace funcast
