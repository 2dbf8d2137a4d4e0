#ifndef SEGZIP_SEGFIT_HPP
#define SEGZIP_SEGFIT_HPP

#include <Eigen/Core>
#include <limits>
#include <string>
#include <vector>

#include "segzip/laplace.hpp"
#include "segzip/model.hpp"

namespace segzip {

// First-order linearization quantities at the current expansion point
// (lambda_hat_i, delta_tilde_i):
//   u    = f(t, psi_i)
//   v    = df/dpsi * dpsi/dlambda
//   g_pc = delta_tilde_i * v
//   o*   = log(offset) - lambda_hat_i * g_pc
// so that o* + delta_tilde*u + lambda_hat*g_pc reproduces
// log(offset) + delta_tilde * f(t, psi(lambda_hat)) exactly.
struct PseudoCovariates {
  std::vector<std::vector<double>> u, v, g_pc, o_star;  // [cluster][obs]
  std::vector<double> lambda_hat;
  std::vector<double> delta_tilde;
  std::vector<double> psi;
  std::vector<ChangepointBounds> bounds;
};

struct FixedEffect {
  std::string name;
  double estimate = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
};

struct ClusterModes {
  std::string id;
  Eigen::VectorXd b;  // q_total modes: (b_i, d_i?, l_i?)
  double d = 0.0;
  double l = 0.0;
  std::vector<int> zeta_months;  // global month level per zeta mode
  Eigen::VectorXd zeta;
};

struct SegFitResult {
  ModelSpec spec;
  Eigen::VectorXd theta;  // packed parameters in the spec layout

  std::vector<FixedEffect> fixed;
  Eigen::MatrixXd g_matrix;
  std::vector<double> g_variances;
  Eigen::MatrixXd g_correlations;  // off-diagonals reported as correlations
  std::vector<double> g_variance_se;
  double sigma_zeta2 = std::numeric_limits<double>::quiet_NaN();

  std::vector<ClusterModes> cluster_modes;
  Eigen::VectorXd shared_zeta;  // SharedMonth only
  std::vector<int> shared_zeta_months;

  std::vector<double> cluster_changepoints;  // psi_hat_i, random mode only
  std::vector<ChangepointBounds> cluster_bounds;
  double lambda_hat = std::numeric_limits<double>::quiet_NaN();
  double lambda_se = std::numeric_limits<double>::quiet_NaN();
  double population_changepoint = std::numeric_limits<double>::quiet_NaN();
  double population_changepoint_se = std::numeric_limits<double>::quiet_NaN();
  ChangepointBounds population_bounds;

  std::vector<double> loglik_trace;  // one entry per fitted working model
  int iterations = 0;                // == loglik_trace.size()
  bool converged = false;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  InfoCriteria criteria;

  bool rank_deficient = false;
  bool lambda_frozen = false;
  long long n_obs = 0;
  int n_parameters = 0;
};

struct FitOptions {
  OuterOptions outer;
  int max_algorithm_iterations = 50;
  double rel_loglik_tol = 1e-5;
  bool compute_se = true;
  std::vector<std::string> count_names;  // optional labels for x columns
  std::vector<std::string> zero_names;
};

struct GridOptions {
  double step = 0.25;
  // Candidates are swept warm-started in fixed-size chunks; chunks run
  // concurrently, so results do not depend on the thread count.
  int chunk = 16;
  int per_candidate_max_iterations = 0;  // 0: use the outer default
};

struct GridCandidate {
  double psi = 0.0;
  double mse = std::numeric_limits<double>::quiet_NaN();
  double loglik = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  bool failed = false;
};

struct GridResult {
  double chosen_psi = 0.0;
  int chosen_index = -1;
  std::vector<GridCandidate> table;
  RawFit chosen_fit;  // initialization fit at the chosen candidate
};

struct Predictions {
  std::vector<std::vector<double>> y_hat, mu_hat, pi_hat;  // [cluster][obs]
  double mse = std::numeric_limits<double>::quiet_NaN();
};

// Known-changepoint (or no-changepoint) fit: one Laplace ML estimation of
// the assembled design.
SegFitResult fit_known(const Dataset& data, const ModelSpec& spec,
                       const FitOptions& opts = {},
                       const ParamPack* init = nullptr);

// Step-1 pseudo-covariates at per-cluster expansion points.
PseudoCovariates pseudo_step(const std::vector<double>& lambda_hat,
                             const std::vector<double>& delta_tilde,
                             const Dataset& data, const ModelSpec& spec);

// Step-2 working ZIP mixed fit: count design extended by the U and G
// columns (coefficients delta and lambda), random design by U / G for d_i
// and l_i, offset replaced by O*.  An all-zero G column freezes lambda at
// the expansion point instead of fitting a degenerate model.
RawFit working_fit(const Dataset& data, const ModelSpec& spec,
                   const PseudoCovariates& pseudo,
                   const Eigen::VectorXd& init_theta, const FitOptions& opts,
                   bool* lambda_frozen);

// Full iterative algorithm from a given starting changepoint or from the
// grid search.
SegFitResult fit_random(const Dataset& data, const ModelSpec& spec,
                        double init_psi, const FitOptions& opts = {});
SegFitResult fit_random(const Dataset& data, const ModelSpec& spec,
                        const GridOptions& grid, const FitOptions& opts = {});

// MSE grid search for the initial changepoint (ties break to the smaller
// psi; endpoints are nudged inward before the lambda transform).
GridResult grid_init(const Dataset& data, const ModelSpec& spec,
                     const GridOptions& grid, const FitOptions& opts = {});

// Conditional predictions y_hat = (1 - pi_hat) mu_hat at the fixed-effect
// estimates and random-effect modes.
Predictions predict(const SegFitResult& fit, const Dataset& data);

}  // namespace segzip

#endif
