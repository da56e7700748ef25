#pragma once

#include <cmath>
#include <optional>

#include "funcast/ar_garch.hpp"
#include "funcast/arma.hpp"
#include "funcast/sbekk.hpp"
#include "funcast/var.hpp"

namespace funcast {

/// How far a fit is from the parameter restrictions that a unit marginal score
/// variance implies. Purely diagnostic; estimation never enforces them.
struct UnitVarianceReport {
  double residual = 0.0;           // absolute (univariate) or Frobenius (multivariate) gap
  double implied_variance = 0.0;   // marginal score variance implied by the fit (univariate)
  double scale = 1.0;              // variance used to standardise

  bool satisfied(double tol = 1e-8) const { return residual <= tol; }
};

/// Univariate AR(1)-GARCH(1,1): compares 1 - ar^2 with var_const / (1 - arch - garch),
/// both expressed for the series standardised by `scale` (defaults to its sample variance).
inline UnitVarianceReport check_unit_variance_constraints(const ArGarchFit& fit,
                                                          std::optional<double> scale = std::nullopt) {
  const auto& p = fit.params;
  UnitVarianceReport r;
  r.scale = scale.value_or(fit.series_variance > 0.0 ? fit.series_variance : 1.0);
  const double innov = p.var_const / (1.0 - (p.arch + p.garch));
  r.implied_variance = innov / (1.0 - p.ar * p.ar);
  r.residual = std::abs((1.0 - p.ar * p.ar) - innov / r.scale);
  return r;
}

/// Multivariate VAR(1)-sBEKK(1,1): compares the innovation covariance implied by
/// the mean equation, Gamma - Pi Gamma Pi', with C C' / (1 - (a + g)), after
/// standardising by the diagonal of the marginal covariance Gamma.
inline UnitVarianceReport check_unit_variance_constraints(const VarFit& var_fit, const SbekkFit& bekk_fit) {
  const Mat& gamma = var_fit.marginal_cov;
  const Vec inv_sd = gamma.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const Mat lhs = gamma - var_fit.pi1 * gamma * var_fit.pi1.transpose();
  const Mat rhs = bekk_fit.cct() / (1.0 - (bekk_fit.a + bekk_fit.g));
  UnitVarianceReport r;
  r.residual = (inv_sd.asDiagonal() * (lhs - rhs) * inv_sd.asDiagonal()).norm();
  r.implied_variance = 1.0;
  r.scale = 1.0;
  return r;
}

}  // namespace funcast
