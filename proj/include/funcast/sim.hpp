#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <type_traits>
#include <variant>
#include <vector>

#include "funcast/curves.hpp"
#include "funcast/error.hpp"
#include "funcast/linalg.hpp"

namespace funcast {

/// beta_i = Pi beta_{i-1} + eps_i, eps_i ~ N(0, Sigma)
struct LinearVarDynamics {
  Mat pi;
  Mat sigma;
};

/// beta_i = Pi beta_{i-1} + H_i^{1/2} eta_i, H_i = C C' + a eps eps' + g H_{i-1}
struct VarSbekkDynamics {
  Mat pi;
  Mat c;
  double a = 0.0;
  double g = 0.0;
};

/// Independent AR(1)-GARCH(1,1) per score.
struct UnivArGarchDynamics {
  Vec ar;
  Vec var_const;
  Vec arch;
  Vec garch;
};

using ScoreDynamics = std::variant<LinearVarDynamics, VarSbekkDynamics, UnivArGarchDynamics>;

struct KlFactorSpec {
  int J0 = 0;
  int T = 0;
  Vec mean_curve;      // T
  Mat eigenfunctions;  // T x J0, orthonormal columns
  Vec lambdas;         // J0, score scale factors
  ScoreDynamics dynamics;
  double noise_sigma2 = 0.0;
  std::uint64_t seed = 0;
  std::int64_t grid_step = 0;  // recorded on the output panel only
};

inline bool is_heteroscedastic(const ScoreDynamics& d) { return !std::holds_alternative<LinearVarDynamics>(d); }

enum class BasisKind { Random, Fourier };

/// Orthonormal T x J0 basis: QR of seeded Gaussian vectors, or the first J0
/// real Fourier vectors (constant, cos 1, sin 1, cos 2, ...).
inline Mat make_orthonormal_basis(int T, int J0, std::uint64_t seed, BasisKind kind = BasisKind::Random) {
  require(J0 >= 1 && T >= 1, ErrorCode::InvalidSpec, "basis dimensions must be positive");
  require(J0 <= T, ErrorCode::InvalidSpec, "J0 exceeds T");
  Mat raw(T, J0);
  if (kind == BasisKind::Random) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    for (int c = 0; c < J0; ++c)
      for (int r = 0; r < T; ++r) raw(r, c) = n01(rng);
  } else {
    for (int c = 0; c < J0; ++c) {
      const int freq = (c + 1) / 2;
      for (int r = 0; r < T; ++r) {
        const double x = 2.0 * std::numbers::pi * freq * (r + 0.5) / T;
        raw(r, c) = c == 0 ? 1.0 : (c % 2 == 1 ? std::cos(x) : std::sin(x));
      }
    }
  }
  Eigen::HouseholderQR<Mat> qr(raw);
  Mat q = qr.householderQ() * Mat::Identity(T, J0);
  for (int c = 0; c < J0; ++c) normalize_sign(q.col(c));
  return q;
}

/// Rewrites the innovation scale so that each standardised score has unit
/// marginal variance: Sigma = I - Pi Pi', C C' = (1-a-g)(I - Pi Pi'),
/// var_const = (1 - ar^2)(1 - arch - garch).
inline void enforce_unit_variance(ScoreDynamics& dyn) {
  std::visit(
      [](auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, UnivArGarchDynamics>) {
          d.var_const = (1.0 - d.ar.array().square()) * (1.0 - d.arch.array() - d.garch.array());
        } else {
          const Eigen::Index j = d.pi.rows();
          const Mat target = Mat::Identity(j, j) - d.pi * d.pi.transpose();
          Eigen::LLT<Mat> llt(target);
          require(llt.info() == Eigen::Success, ErrorCode::InvalidSpec, "I - Pi Pi' is not positive definite");
          if constexpr (std::is_same_v<D, LinearVarDynamics>) {
            d.sigma = target;
          } else {
            d.c = Eigen::LLT<Mat>((1.0 - d.a - d.g) * target).matrixL();
          }
        }
      },
      dyn);
}

inline void validate_spec(const KlFactorSpec& s) {
  require(s.J0 >= 1 && s.T >= 1 && s.J0 <= s.T, ErrorCode::InvalidSpec, "need 1 <= J0 <= T");
  require(s.mean_curve.size() == s.T, ErrorCode::InvalidSpec, "mean_curve length differs from T");
  require(s.eigenfunctions.rows() == s.T && s.eigenfunctions.cols() == s.J0, ErrorCode::InvalidSpec,
          "eigenfunctions must be T x J0");
  const Mat gram = s.eigenfunctions.transpose() * s.eigenfunctions;
  require((gram - Mat::Identity(s.J0, s.J0)).cwiseAbs().maxCoeff() <= 1e-10, ErrorCode::InvalidSpec,
          "eigenfunctions are not orthonormal");
  require(s.lambdas.size() == s.J0 && (s.lambdas.array() > 0.0).all(), ErrorCode::InvalidSpec,
          "lambdas must be J0 positive values");
  require(s.noise_sigma2 >= 0.0, ErrorCode::InvalidSpec, "noise_sigma2 must be nonnegative");
  const int j0 = s.J0;
  std::visit(
      [j0](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<D, UnivArGarchDynamics>) {
          require(d.ar.size() == j0 && d.var_const.size() == j0 && d.arch.size() == j0 && d.garch.size() == j0,
                  ErrorCode::InvalidSpec, "per-score GARCH vectors must have J0 entries");
          for (int k = 0; k < j0; ++k) {
            require(std::abs(d.ar(k)) < 1.0, ErrorCode::InvalidSpec, "|ar| must be below 1");
            require(d.var_const(k) > 0.0 && d.arch(k) >= 0.0 && d.garch(k) >= 0.0 && d.arch(k) + d.garch(k) < 1.0,
                    ErrorCode::InvalidSpec, "GARCH parameters violate positivity or stationarity");
          }
        } else {
          require(d.pi.rows() == j0 && d.pi.cols() == j0, ErrorCode::InvalidSpec, "Pi must be J0 x J0");
          require(spectral_radius(d.pi) < 1.0, ErrorCode::InvalidSpec, "Pi has spectral radius >= 1");
          if constexpr (std::is_same_v<D, LinearVarDynamics>) {
            require(d.sigma.rows() == j0 && d.sigma.cols() == j0 && is_psd(d.sigma), ErrorCode::InvalidSpec,
                    "Sigma must be J0 x J0 PSD");
          } else {
            require(d.c.rows() == j0 && d.c.cols() == j0, ErrorCode::InvalidSpec, "C must be J0 x J0");
            require(d.a >= 0.0 && d.g >= 0.0 && d.a + d.g < 1.0, ErrorCode::InvalidSpec,
                    "sBEKK needs a, g >= 0 and a + g < 1");
          }
        }
      },
      s.dynamics);
}

struct SimulatedScores {
  Mat scores;                // n x J0, standardised (before lambda scaling)
  std::vector<Mat> cond_cov;  // per day: conditional covariance of the innovation
  Mat cond_mean;             // n x J0: E[beta_i | past]
};

/// Runs the score recursion for burn_in + n steps and keeps the last n.
inline SimulatedScores simulate_scores(const ScoreDynamics& dyn, int j0, int n, int burn_in, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  auto draw = [&](Eigen::Index dim) {
    Vec v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = n01(rng);
    return v;
  };
  SimulatedScores out;
  out.scores.resize(n, j0);
  out.cond_mean.resize(n, j0);
  out.cond_cov.reserve(static_cast<std::size_t>(n));
  const int total = burn_in + n;

  std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        Vec beta = Vec::Zero(j0);
        if constexpr (std::is_same_v<D, LinearVarDynamics>) {
          const Mat root = sym_sqrt(d.sigma);
          for (int i = 0; i < total; ++i) {
            const Vec mean = d.pi * beta;
            beta = mean + root * draw(j0);
            if (i >= burn_in) {
              out.scores.row(i - burn_in) = beta.transpose();
              out.cond_mean.row(i - burn_in) = mean.transpose();
              out.cond_cov.push_back(d.sigma);
            }
          }
        } else if constexpr (std::is_same_v<D, VarSbekkDynamics>) {
          const Mat cct = d.c * d.c.transpose();
          Mat h = cct / (1.0 - d.a - d.g);
          Vec eps = Vec::Zero(j0);
          for (int i = 0; i < total; ++i) {
            if (i > 0) h = cct + d.a * eps * eps.transpose() + d.g * h;
            h = 0.5 * (h + h.transpose());
            const Vec mean = d.pi * beta;
            eps = sym_sqrt(h) * draw(j0);
            beta = mean + eps;
            if (i >= burn_in) {
              out.scores.row(i - burn_in) = beta.transpose();
              out.cond_mean.row(i - burn_in) = mean.transpose();
              out.cond_cov.push_back(h);
            }
          }
        } else {
          Vec h = d.var_const.array() / (1.0 - d.arch.array() - d.garch.array());
          Vec eps = Vec::Zero(j0);
          for (int i = 0; i < total; ++i) {
            if (i > 0) h = d.var_const.array() + d.arch.array() * eps.array().square() + d.garch.array() * h.array();
            const Vec mean = d.ar.cwiseProduct(beta);
            eps = h.cwiseSqrt().cwiseProduct(draw(j0));
            beta = mean + eps;
            if (i >= burn_in) {
              out.scores.row(i - burn_in) = beta.transpose();
              out.cond_mean.row(i - burn_in) = mean.transpose();
              out.cond_cov.push_back(h.asDiagonal());
            }
          }
        }
      },
      dyn);
  return out;
}

struct SimulatedPanel {
  ReturnCurvePanel panel;  // raw curves
  Mat true_scores;         // n x J0, lambda-scaled coefficients on the eigenfunctions
  Mat cond_mean;           // n x J0, lambda-scaled one-step conditional means
  std::vector<Mat> cond_cov;  // lambda-scaled one-step conditional covariances
  Mat noise;               // n x T, projected noise
};

/// X_i = mu + sum_j sqrt(lambda_j) beta_ij xi_j + e_i, where e_i is Gaussian
/// noise with variance noise_sigma2 projected off span(xi).
inline SimulatedPanel simulate_panel(const KlFactorSpec& spec, int n_days, int burn_in = 500) {
  validate_spec(spec);
  require(n_days >= 1, ErrorCode::InvalidSpec, "n_days must be positive");
  require(burn_in >= 0, ErrorCode::InvalidSpec, "burn_in must be nonnegative");
  if (is_heteroscedastic(spec.dynamics))
    require(burn_in >= 200, ErrorCode::InvalidSpec, "heteroscedastic dynamics need burn_in >= 200");

  std::mt19937_64 rng(spec.seed);
  const SimulatedScores sc = simulate_scores(spec.dynamics, spec.J0, n_days, burn_in, rng);
  const Vec scale = spec.lambdas.cwiseSqrt();
  const Mat& xi = spec.eigenfunctions;

  SimulatedPanel out;
  out.true_scores = sc.scores * scale.asDiagonal();
  out.cond_mean = sc.cond_mean * scale.asDiagonal();
  out.cond_cov.reserve(sc.cond_cov.size());
  for (const auto& h : sc.cond_cov) out.cond_cov.push_back(scale.asDiagonal() * h * scale.asDiagonal());

  std::normal_distribution<double> n01;
  const double sd = std::sqrt(spec.noise_sigma2);
  out.noise = Mat::Zero(n_days, spec.T);
  if (sd > 0.0) {
    for (int i = 0; i < n_days; ++i)
      for (int t = 0; t < spec.T; ++t) out.noise(i, t) = sd * n01(rng);
    out.noise -= out.noise * xi * xi.transpose();
  }
  const Mat x = (out.true_scores * xi.transpose() + out.noise).rowwise() + spec.mean_curve.transpose();
  out.panel = panel_from_matrix(x, spec.grid_step);
  return out;
}

}  // namespace funcast
