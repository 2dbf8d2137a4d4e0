#include "segzip/bfgs.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace segzip {

namespace {
const double kFdScale = std::cbrt(std::numeric_limits<double>::epsilon());
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, long long* n_evals) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd g(n);
  Eigen::VectorXd xp = x;
  for (int k = 0; k < n; ++k) {
    const double h = kFdScale * (1.0 + std::abs(x[k]));
    xp[k] = x[k] + h;
    const double fp = f(xp);
    xp[k] = x[k] - h;
    const double fm = f(xp);
    xp[k] = x[k];
    g[k] = (fp - fm) / (2.0 * h);
    if (n_evals) *n_evals += 2;
  }
  return g;
}

Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x, long long* n_evals) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd h(n);
  for (int k = 0; k < n; ++k) h[k] = kFdScale * (1.0 + std::abs(x[k]));
  const double f0 = f(x);
  if (n_evals) *n_evals += 1;
  Eigen::VectorXd xp = x;
  for (int k = 0; k < n; ++k) {
    xp[k] = x[k] + h[k];
    const double fp = f(xp);
    xp[k] = x[k] - h[k];
    const double fm = f(xp);
    xp[k] = x[k];
    hess(k, k) = (fp - 2.0 * f0 + fm) / (h[k] * h[k]);
    if (n_evals) *n_evals += 2;
  }
  for (int k = 0; k < n; ++k) {
    for (int l = k + 1; l < n; ++l) {
      xp[k] = x[k] + h[k];
      xp[l] = x[l] + h[l];
      const double fpp = f(xp);
      xp[l] = x[l] - h[l];
      const double fpm = f(xp);
      xp[k] = x[k] - h[k];
      const double fmm = f(xp);
      xp[l] = x[l] + h[l];
      const double fmp = f(xp);
      xp[k] = x[k];
      xp[l] = x[l];
      hess(k, l) = hess(l, k) = (fpp - fpm - fmp + fmm) / (4.0 * h[k] * h[l]);
      if (n_evals) *n_evals += 4;
    }
  }
  return hess;
}

BfgsResult bfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                         const Eigen::VectorXd& x0, const BfgsOptions& opts) {
  const int n = static_cast<int>(x0.size());
  BfgsResult res;
  res.x = x0;
  res.f = f(x0);
  res.n_evals = 1;
  if (!std::isfinite(res.f))
    throw std::invalid_argument("bfgs_minimize: objective not finite at init");

  Eigen::MatrixXd b_inv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = x0;
  double fx = res.f;
  Eigen::VectorXd g = fd_gradient(f, x, &res.n_evals);
  double rel_df = std::numeric_limits<double>::infinity();
  bool first_update = true;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter;
    if (g.lpNorm<Eigen::Infinity>() < opts.tol_grad && rel_df < opts.tol_rel_f) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd d = -(b_inv * g);
    double slope = g.dot(d);
    if (!(slope < 0.0)) {  // reset on a non-descent direction
      b_inv.setIdentity();
      d = -g;
      slope = -g.squaredNorm();
      first_update = true;
    }

    // backtracking Armijo
    double alpha = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int h = 0; h < opts.max_halvings; ++h) {
      x_new = x + alpha * d;
      f_new = f(x_new);
      ++res.n_evals;
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.converged = g.lpNorm<Eigen::Infinity>() < opts.tol_grad;
      break;
    }

    Eigen::VectorXd g_new = fd_gradient(f, x_new, &res.n_evals);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (first_update) {
        b_inv = (sy / yv.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
        first_update = false;
      }
      const Eigen::VectorXd bv = b_inv * yv;
      const double ybv = yv.dot(bv);
      // BFGS inverse update
      b_inv += ((sy + ybv) / (sy * sy)) * (s * s.transpose());
      const Eigen::MatrixXd sb = s * bv.transpose();
      b_inv -= (sb + sb.transpose()) / sy;
    }

    rel_df = std::abs(fx - f_new) / std::max(1e-300, std::abs(fx));
    x = x_new;
    fx = f_new;
    g = g_new;
    if (fx < res.f) {
      res.f = fx;
      res.x = x;
    }
    res.iterations = iter + 1;
  }
  if (fx <= res.f) {
    res.f = fx;
    res.x = x;
  }
  return res;
}

}  // namespace segzip
