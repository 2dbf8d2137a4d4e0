#ifndef SEGZIP_BFGS_HPP
#define SEGZIP_BFGS_HPP

#include <Eigen/Core>
#include <functional>

namespace segzip {

struct BfgsOptions {
  int max_iterations = 500;
  double tol_rel_f = 1e-8;  // relative objective change on an accepted step
  double tol_grad = 1e-4;   // gradient max-norm
  int max_halvings = 50;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  bool converged = false;
  int iterations = 0;
  long long n_evals = 0;
};

// Central finite-difference gradient with per-coordinate step
// h_k = eps^(1/3) * (1 + |x_k|).
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, long long* n_evals);

// Central finite-difference Hessian, same stepping rule.
Eigen::MatrixXd fd_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                           const Eigen::VectorXd& x, long long* n_evals);

// BFGS (inverse-Hessian update) with backtracking Armijo line search.
// Objective values of +inf are treated as out-of-domain rejections.
// Declares convergence when both the relative objective change of the last
// accepted step and the gradient max-norm fall under their tolerances;
// always returns the best iterate seen.
BfgsResult bfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                         const Eigen::VectorXd& x0, const BfgsOptions& opts);

}  // namespace segzip

#endif
