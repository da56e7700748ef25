#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "funcast/curves.hpp"
#include "funcast/error.hpp"
#include "funcast/linalg.hpp"

namespace funcast {

/// Quadrature weight of the grid inner product <x,y> = w * sum_t x(t) y(t).
enum class GridWeight {
  Unit,      // w = 1, scores match a plain PCA
  InverseT,  // w = 1/T, Riemann sum over [0,1]
};

struct FpcaOptions {
  double delta = 0.85;
  int j_max = 0;  // 0 selects min(N - 1, T)
  GridWeight weight = GridWeight::Unit;
};

struct FpcaBasis {
  Vec mean_curve;      // T
  Vec eigenvalues;     // J_max, nonincreasing, >= 0
  Mat eigenfunctions;  // T x J_max, orthonormal under the grid inner product
  Mat scores;          // N x J_max
  int J = 0;
  Vec cpv;             // J_max cumulative variance fractions
  double sigma2_resid = 0.0;
  Vec omega;           // T
  double weight = 1.0;
  std::vector<std::string> warnings;

  int N() const { return static_cast<int>(scores.rows()); }
  int T() const { return static_cast<int>(eigenfunctions.rows()); }
  int j_max() const { return static_cast<int>(eigenvalues.size()); }

  /// T x J block of retained eigenfunctions.
  Mat retained() const { return eigenfunctions.leftCols(J); }
};

/// Smallest J whose cumulative share of positive eigenvalue mass reaches delta.
inline int select_J(const Vec& eigenvalues, double delta) {
  require(delta > 0.0 && delta <= 1.0, ErrorCode::PreconditionViolation, "delta must lie in (0,1]");
  double total = 0.0;
  for (Eigen::Index j = 0; j < eigenvalues.size(); ++j)
    if (eigenvalues(j) > 0.0) total += eigenvalues(j);
  require(total > 0.0, ErrorCode::AllZeroEigenvalues, "no positive eigenvalue");
  double cum = 0.0;
  for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
    cum += eigenvalues(j);
    // relative slack absorbs rounding in the running sum
    if (cum / total >= delta - 1e-12) return static_cast<int>(j) + 1;
  }
  return static_cast<int>(eigenvalues.size());
}

inline FpcaBasis fit_fpca(const ReturnCurvePanel& panel, const FpcaOptions& opt = {}) {
  require(panel.demeaned, ErrorCode::NotDemeaned, "fit_fpca requires a demeaned panel");
  require(panel.N() >= 3, ErrorCode::PreconditionViolation, "fit_fpca needs at least 3 curves");
  const Mat x = panel.matrix();
  const int n = panel.N();
  const int t_len = panel.T();
  const double w = opt.weight == GridWeight::Unit ? 1.0 : 1.0 / t_len;

  const Mat cov = x.transpose() * x / static_cast<double>(n);
  SymEigen eig = sym_eigen_desc(cov * w);
  require(eig.values(0) > 0.0, ErrorCode::DegeneratePanel, "covariance has rank 0");
  eig.values = eig.values.cwiseMax(0.0);

  int j_max = opt.j_max > 0 ? opt.j_max : std::min(n - 1, t_len);
  j_max = std::clamp(j_max, 1, std::min(n, t_len));

  FpcaBasis b;
  b.weight = w;
  b.mean_curve = panel.mean_curve.empty() ? Vec::Zero(t_len) : to_vec(panel.mean_curve);
  b.eigenvalues = eig.values.head(j_max);
  b.eigenfunctions = eig.vectors.leftCols(j_max) / std::sqrt(w);
  for (int j = 0; j < j_max; ++j) normalize_sign(b.eigenfunctions.col(j));
  b.scores = w * x * b.eigenfunctions;
  b.J = std::min(select_J(eig.values, opt.delta), j_max);

  double total = 0.0;
  for (Eigen::Index j = 0; j < eig.values.size(); ++j) total += eig.values(j);
  b.cpv.resize(j_max);
  double cum = 0.0;
  for (int j = 0; j < j_max; ++j) {
    cum += b.eigenvalues(j);
    b.cpv(j) = cum / total;
  }

  const double lead = b.eigenvalues(0);
  for (int j = 0; j + 1 < j_max; ++j) {
    if (b.eigenvalues(j + 1) > 0.0 && b.eigenvalues(j) - b.eigenvalues(j + 1) < 1e-10 * lead)
      b.warnings.push_back("near-degenerate eigenvalues at positions " + std::to_string(j + 1) + "," +
                           std::to_string(j + 2));
  }

  const Mat phi = b.retained();
  const Mat resid = x - b.scores.leftCols(b.J) * phi.transpose();
  double var_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = resid.row(i).mean();
    var_sum += (resid.row(i).array() - m).square().sum() / std::max(1, t_len - 1);
  }
  b.sigma2_resid = var_sum / n;
  const Vec proj_diag = w * phi.rowwise().squaredNorm();
  b.omega = (b.sigma2_resid * (Vec::Ones(t_len) - proj_diag)).cwiseMax(0.0);
  return b;
}

/// Demeans a raw panel and fits the basis in one step.
inline FpcaBasis fit_fpca_raw(const ReturnCurvePanel& raw, const FpcaOptions& opt = {}) {
  return fit_fpca(demean_panel(raw), opt);
}

/// In-sample fitted curve mu + sum_{j<=J_use} beta_ij xi_j for row i (0-based).
inline Vec reconstruct(const FpcaBasis& b, int i, int j_use) {
  require(i >= 0 && i < b.N(), ErrorCode::IndexOutOfRange, "day index outside the basis sample");
  require(j_use >= 1 && j_use <= b.j_max(), ErrorCode::IndexOutOfRange, "J_use outside [1, J_max]");
  return b.mean_curve + b.eigenfunctions.leftCols(j_use) * b.scores.row(i).head(j_use).transpose();
}

}  // namespace funcast
