#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "funcast/linalg.hpp"

namespace funcast::optim {

struct BfgsOptions {
  int max_iter = 500;
  double grad_tol = 1e-6;
  double f_tol = 1e-11;
  double armijo = 1e-4;
  double max_step_norm = 1.0;  // first-iteration trust cap in parameter space
};

struct OptimResult {
  Vec x;
  double value = std::numeric_limits<double>::infinity();
  Vec grad;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // accepted objective values, first entry is the start
};

/// Objective returning f(x) and writing the gradient into `grad`.
using Objective = std::function<double(const Vec& x, Vec& grad)>;
using ValueOnly = std::function<double(const Vec& x)>;

inline Vec numeric_gradient(const ValueOnly& f, const Vec& x, double rel_step = 1e-5) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x(i)));
    xp(i) = x(i) + h;
    const double fp = f(xp);
    xp(i) = x(i) - h;
    const double fm = f(xp);
    xp(i) = x(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Wraps a value-only objective with a central-difference gradient.
inline Objective with_numeric_gradient(ValueOnly f, double rel_step = 1e-5) {
  return [f = std::move(f), rel_step](const Vec& x, Vec& grad) {
    const double v = f(x);
    grad = std::isfinite(v) ? numeric_gradient(f, x, rel_step) : Vec::Zero(x.size());
    return v;
  };
}

/// Quasi-Newton minimisation with inverse-Hessian BFGS updates and Armijo
/// backtracking. Non-finite objective values are treated as infeasible and
/// trigger further backtracking, so accepted values never increase.
inline OptimResult minimize_bfgs(const Objective& f, Vec x0, const BfgsOptions& opt = {}) {
  OptimResult res;
  const Eigen::Index n = x0.size();
  res.x = std::move(x0);
  res.grad = Vec::Zero(n);
  res.value = f(res.x, res.grad);
  res.trace.push_back(res.value);
  if (!std::isfinite(res.value)) return res;

  Mat hinv = Mat::Identity(n, n);
  bool fresh = true;
  Vec g_new(n);
  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    if (res.grad.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
      res.converged = true;
      break;
    }
    Vec dir = -hinv * res.grad;
    double slope = dir.dot(res.grad);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      fresh = true;
      dir = -res.grad;
      slope = dir.dot(res.grad);
    }
    double step = 1.0;
    if (fresh && dir.norm() > opt.max_step_norm) step = opt.max_step_norm / dir.norm();

    bool accepted = false;
    Vec x_new;
    double f_new = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + step * dir;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= res.value + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        hinv.setIdentity();
        fresh = true;
        continue;
      }
      // no descent possible along the gradient: stationary to working precision
      res.converged = res.grad.lpNorm<Eigen::Infinity>() < 1e3 * opt.grad_tol;
      break;
    }

    const Vec s = x_new - res.x;
    const Vec y = g_new - res.grad;
    const double f_old = res.value;
    res.x = x_new;
    res.value = f_new;
    res.grad = g_new;
    res.trace.push_back(f_new);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) hinv *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Mat eye = Mat::Identity(n, n);
      hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) +
             rho * s * s.transpose();
      fresh = false;
    }
    if (std::abs(f_old - f_new) <= opt.f_tol * (std::abs(f_new) + opt.f_tol)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace funcast::optim
