#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "funcast/error.hpp"

namespace funcast {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Upper standard-normal quantile z such that P(|Z| <= z) = level.
inline double normal_two_sided_quantile(double level) {
  require(level > 0.0 && level < 1.0, ErrorCode::PreconditionViolation,
          "level must lie in (0,1)");
  boost::math::normal_distribution<double> n01;
  return boost::math::quantile(n01, 0.5 + 0.5 * level);
}

inline double normal_cdf(double x) {
  boost::math::normal_distribution<double> n01;
  return boost::math::cdf(n01, x);
}

struct SymEigen {
  Vec values;   // nonincreasing
  Mat vectors;  // columns match values
};

/// Symmetric eigendecomposition sorted by nonincreasing eigenvalue. The sort is
/// stable with respect to the solver's order, so exact ties keep their order.
inline SymEigen sym_eigen_desc(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  const Eigen::Index n = a.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  // solver output is ascending; walk it backwards
  for (Eigen::Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = n - 1 - k;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    return es.eigenvalues()(x) > es.eigenvalues()(y);
  });
  SymEigen out{Vec(n), Mat(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = es.eigenvalues()(order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = es.eigenvectors().col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

/// Flip a vector so that its largest-magnitude entry (first on ties) is positive.
inline void normalize_sign(Eigen::Ref<Vec> v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best) {
      best = std::abs(v(i));
      arg = i;
    }
  }
  if (v.size() > 0 && v(arg) < 0.0) v = -v;
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues are clipped.
inline Mat sym_sqrt(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline bool is_symmetric(const Mat& a, double tol = 1e-10) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline bool is_psd(const Mat& a, double tol = 1e-10) {
  if (!is_symmetric(a, tol)) return false;
  if (a.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

inline double spectral_radius(const Mat& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Column-wise covariance with divisor n (rows are observations).
inline Mat sample_covariance(const Mat& x) {
  const Mat centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows());
}

inline double sample_variance(const Vec& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size());
}

inline Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace funcast
