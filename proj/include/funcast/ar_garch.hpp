#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "funcast/error.hpp"
#include "funcast/linalg.hpp"
#include "funcast/optim.hpp"

namespace funcast {

struct ConvergenceInfo {
  int iterations = 0;
  double grad_norm = 0.0;
  int restarts_used = 0;
  bool converged = false;
};

/// AR(1)-GARCH(1,1):
///   y_i = mu + ar * y_{i-1} + e_i,   e_i = sqrt(h_i) z_i
///   h_i = var_const + arch * e_{i-1}^2 + garch * h_{i-1}
struct ArGarchParams {
  double mu = 0.0;
  double ar = 0.0;
  double var_const = 1.0;
  double arch = 0.0;
  double garch = 0.0;

  bool valid() const {
    return std::abs(ar) < 1.0 && var_const > 0.0 && arch >= 0.0 && garch >= 0.0 && arch + garch < 1.0;
  }
};

struct ArGarchFit {
  ArGarchParams params;
  Vec cond_var;    // N; entry 0 holds the initial variance
  Vec residuals;   // N; entry 0 is zero (no lagged observation)
  double loglik = 0.0;
  double var_init = 0.0;
  double last_obs = 0.0;
  double series_variance = 0.0;
  ConvergenceInfo info;
  std::vector<std::string> warnings;
};

struct ScoreForecast {
  double mean = 0.0;
  double variance = 0.0;
};

/// Gaussian log-likelihood of y[1..N-1] given y[0], with h_1 = var_init.
/// When `grad` is non-null it receives d loglik / d(mu, ar, var_const, arch, garch).
inline double ar_garch_loglik(const ArGarchParams& p, const Vec& y, double var_init, Vec* grad = nullptr) {
  constexpr double log2pi = 1.8378770664093453;
  using G = std::array<double, 5>;
  G g{}, dh{}, de_prev{};
  double ll = 0.0;
  double h = var_init;
  double e_prev = 0.0;
  for (Eigen::Index i = 1; i < y.size(); ++i) {
    const double e = y(i) - p.mu - p.ar * y(i - 1);
    const G de{-1.0, -y(i - 1), 0.0, 0.0, 0.0};
    if (i >= 2) {
      const double h_new = p.var_const + p.arch * e_prev * e_prev + p.garch * h;
      const G base{0.0, 0.0, 1.0, e_prev * e_prev, h};
      for (int k = 0; k < 5; ++k) dh[k] = base[k] + 2.0 * p.arch * e_prev * de_prev[k] + p.garch * dh[k];
      h = h_new;
    }
    if (!(h > 0.0) || !std::isfinite(h)) return -std::numeric_limits<double>::infinity();
    ll -= 0.5 * (log2pi + std::log(h) + e * e / h);
    const double dl_dh = -0.5 * (1.0 / h - e * e / (h * h));
    const double dl_de = -e / h;
    for (int k = 0; k < 5; ++k) g[k] += dl_dh * dh[k] + dl_de * de[k];
    e_prev = e;
    de_prev = de;
  }
  if (grad) *grad = Eigen::Map<const Vec>(g.data(), 5);
  return ll;
}

/// Variance path h_0..h_{N-1} and residuals e_0..e_{N-1} (e_0 = 0, h_0 = h_1 = var_init).
inline void ar_garch_filter(const ArGarchParams& p, const Vec& y, double var_init, Vec& h, Vec& e) {
  const Eigen::Index n = y.size();
  h = Vec::Constant(n, var_init);
  e = Vec::Zero(n);
  for (Eigen::Index i = 1; i < n; ++i) {
    e(i) = y(i) - p.mu - p.ar * y(i - 1);
    if (i >= 2) h(i) = p.var_const + p.arch * e(i - 1) * e(i - 1) + p.garch * h(i - 1);
  }
}

namespace detail {

struct ArGarchTransform {
  static Vec to_free(const ArGarchParams& p) {
    const double rest = 1.0 - p.arch - p.garch;
    Vec th(5);
    th << p.mu, std::atanh(p.ar), std::log(p.var_const), std::log(p.arch / rest), std::log(p.garch / rest);
    return th;
  }
  static ArGarchParams from_free(const Vec& th) {
    ArGarchParams p;
    p.mu = th(0);
    p.ar = std::tanh(th(1));
    p.var_const = std::exp(th(2));
    const double m = std::max({th(3), th(4), 0.0});
    const double e3 = std::exp(th(3) - m), e4 = std::exp(th(4) - m), e0 = std::exp(-m);
    const double z = e0 + e3 + e4;
    p.arch = e3 / z;
    p.garch = e4 / z;
    return p;
  }
  static Vec chain(const ArGarchParams& p, const Vec& g) {
    Vec out(5);
    out(0) = g(0);
    out(1) = g(1) * (1.0 - p.ar * p.ar);
    out(2) = g(2) * p.var_const;
    out(3) = g(3) * p.arch * (1.0 - p.arch) - g(4) * p.arch * p.garch;
    out(4) = -g(3) * p.arch * p.garch + g(4) * p.garch * (1.0 - p.garch);
    return out;
  }
};

}  // namespace detail

struct ArGarchOptions {
  optim::BfgsOptions bfgs{};
};

/// Joint Gaussian QMLE of AR(1)-GARCH(1,1). The series is standardised for the
/// optimisation and parameters are mapped back afterwards; three deterministic
/// starting points are tried and the best likelihood is kept.
inline ArGarchFit fit_ar_garch(const Vec& series, const ArGarchOptions& opt = {}) {
  const Eigen::Index n = series.size();
  require(n >= 30, ErrorCode::PreconditionViolation, "fit_ar_garch needs at least 30 observations");
  const double mean = series.mean();
  const double var = sample_variance(series);
  require(var > 1e-14 * std::max(1.0, mean * mean), ErrorCode::DegenerateSeries,
          "series has zero sample variance");
  const double scale = std::sqrt(var);
  const Vec z = (series.array() - mean) / scale;

  // OLS AR(1) on the standardised series seeds the mean equation and h_1
  const Vec lag = z.head(n - 1), cur = z.tail(n - 1);
  const double lm = lag.mean(), cm = cur.mean();
  const double sxx = (lag.array() - lm).square().sum();
  double a0 = sxx > 0.0 ? ((lag.array() - lm) * (cur.array() - cm)).sum() / sxx : 0.0;
  a0 = std::clamp(a0, -0.95, 0.95);
  const double mu0 = cm - a0 * lm;
  const double var_init = ((cur.array() - mu0 - a0 * lag.array()).square().sum()) / static_cast<double>(n - 1);

  const double inv_n = 1.0 / static_cast<double>(n - 1);
  const optim::Objective objective = [&](const Vec& th, Vec& grad) {
    const ArGarchParams p = detail::ArGarchTransform::from_free(th);
    Vec g;
    const double ll = ar_garch_loglik(p, z, var_init, &g);
    if (!std::isfinite(ll)) {
      grad = Vec::Zero(5);
      return std::numeric_limits<double>::infinity();
    }
    grad = -inv_n * detail::ArGarchTransform::chain(p, g);
    return -inv_n * ll;
  };

  constexpr std::array<std::array<double, 2>, 3> starts{{{0.05, 0.90}, {0.10, 0.80}, {0.15, 0.70}}};
  optim::OptimResult best;
  int used = 0;
  for (const auto& [arch, garch] : starts) {
    ArGarchParams p0{mu0, a0, var_init * (1.0 - arch - garch), arch, garch};
    optim::OptimResult r = optim::minimize_bfgs(objective, detail::ArGarchTransform::to_free(p0), opt.bfgs);
    ++used;
    if (std::isfinite(r.value) && (!std::isfinite(best.value) || r.value < best.value)) best = std::move(r);
  }
  require(std::isfinite(best.value), ErrorCode::NonConvergence, "no starting point gave a finite likelihood");

  const ArGarchParams ps = detail::ArGarchTransform::from_free(best.x);
  ArGarchFit fit;
  fit.params.ar = ps.ar;
  fit.params.mu = mean * (1.0 - ps.ar) + scale * ps.mu;
  fit.params.var_const = ps.var_const * var;
  fit.params.arch = ps.arch;
  fit.params.garch = ps.garch;
  fit.var_init = var_init * var;
  fit.series_variance = var;
  fit.last_obs = series(n - 1);
  fit.loglik = -best.value / inv_n - static_cast<double>(n - 1) * std::log(scale);
  ar_garch_filter(fit.params, series, fit.var_init, fit.cond_var, fit.residuals);
  fit.info = {best.iterations, best.grad.lpNorm<Eigen::Infinity>(), used, best.converged};
  if (!best.converged) fit.warnings.push_back("AR-GARCH optimiser hit its iteration limit");
  return fit;
}

/// One-step conditional mean and variance of the next observation.
inline ScoreForecast forecast_ar_garch(const ArGarchFit& fit, double last_obs, double last_var, double last_resid) {
  const auto& p = fit.params;
  return {p.mu + p.ar * last_obs, p.var_const + p.arch * last_resid * last_resid + p.garch * last_var};
}

inline ScoreForecast forecast_ar_garch(const ArGarchFit& fit) {
  const Eigen::Index n = fit.cond_var.size();
  return forecast_ar_garch(fit, fit.last_obs, fit.cond_var(n - 1), fit.residuals(n - 1));
}

}  // namespace funcast
