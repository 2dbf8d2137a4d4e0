// Test-only reference implementations, independent of the library's
// estimation code paths: Gauss-Hermite quadrature, 1-D minimization,
// bisection, and simple statistics.
#ifndef SEGZIP_TESTS_ORACLES_HPP
#define SEGZIP_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracles {

struct GaussHermite {
  std::vector<double> nodes, weights;
};

// Golub-Welsch on the Hermite recurrence (physicists' weight e^{-x^2}).
inline GaussHermite gauss_hermite(int n) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double off = std::sqrt(k / 2.0);
    jac(k, k - 1) = jac(k - 1, k) = off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  GaussHermite gh;
  gh.nodes.resize(n);
  gh.weights.resize(n);
  const double sqrt_pi = std::sqrt(3.14159265358979323846);
  for (int k = 0; k < n; ++k) {
    gh.nodes[k] = es.eigenvalues()[k];
    const double v0 = es.eigenvectors()(0, k);
    gh.weights[k] = sqrt_pi * v0 * v0;
  }
  return gh;
}

// Golden-section minimizer on [lo, hi].
inline double golden_min(const std::function<double(double)>& f, double lo,
                         double hi, int iters = 200) {
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

// log integral of exp(logf) against a N(0, sd^2) prior folded into logf;
// adaptive Gauss-Hermite centered at the integrand's mode.
// logf must already include every term of the log-integrand.
inline double agh_log_integral(const std::function<double(double)>& logf,
                               double center_guess, double scan_width,
                               const GaussHermite& gh) {
  const double mode = golden_min(
      [&](double b) { return -logf(b); }, center_guess - scan_width,
      center_guess + scan_width);
  const double h = 1e-4 * (1.0 + std::abs(mode));
  const double curv =
      -(logf(mode + h) - 2.0 * logf(mode) + logf(mode - h)) / (h * h);
  const double sigma = curv > 0 ? 1.0 / std::sqrt(curv) : 1.0;
  const double s = std::sqrt(2.0) * sigma;
  double max_term = -1e308;
  std::vector<double> terms(gh.nodes.size());
  for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
    terms[k] = std::log(gh.weights[k]) + gh.nodes[k] * gh.nodes[k] +
               logf(mode + s * gh.nodes[k]);
    max_term = std::max(max_term, terms[k]);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - max_term);
  return std::log(s) + max_term + std::log(sum);
}

// Bisection root of a continuous function with a sign change on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo,
                     double hi, double tol = 1e-12) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if (flo * fhi > 0) throw std::invalid_argument("bisect: no sign change");
  for (int i = 0; i < 200 && hi - lo > tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0) return mid;
    if (flo * fm < 0) {
      hi = mid;
      fhi = fm;
    } else {
      lo = mid;
      flo = fm;
    }
  }
  return 0.5 * (lo + hi);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace oracles

#endif
