#ifndef SEGZIP_LAPLACE_HPP
#define SEGZIP_LAPLACE_HPP

#include <Eigen/Core>
#include <limits>
#include <memory>
#include <vector>

#include "segzip/bfgs.hpp"
#include "segzip/model.hpp"
#include "segzip/problem.hpp"

namespace segzip {

struct InnerOptions {
  double tol = 1e-8;  // gradient max-norm at the mode
  int max_iterations = 100;
  bool want_dense_hessian = false;
  bool record_trace = false;
};

// Saddle point of one independence block's joint negative log-density.
struct InnerResult {
  Eigen::VectorXd mode;
  Eigen::MatrixXd hessian;  // dense joint Hessian at the mode (on request)
  double h_at_mode = std::numeric_limits<double>::quiet_NaN();
  double logdet_hessian = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  std::vector<double> h_trace;  // accepted objective values (on request)
};

struct OuterOptions {
  BfgsOptions bfgs;  // rel-loglik 1e-8 / grad max-norm 1e-4 / 500 iterations
  InnerOptions inner;
  bool warm_start = true;
  bool parallel = true;
};

struct RawFit {
  Eigen::VectorXd theta;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd outer_hessian;  // numerical observed information, on demand
  bool converged = false;
  int n_outer_iterations = 0;
  long long n_evals = 0;
  bool rank_deficient = false;
  std::vector<Eigen::VectorXd> modes;  // per independence block at theta
};

struct LogmargValue {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  int failed_block = -1;
};

// Laplace-approximated marginal log-likelihood of an assembled ZIP mixed
// model.
//
// Independence blocks are single clusters (zeta absent or per-cluster) or
// the whole panel (shared month effect).  Within a block the Hessian of the
// joint negative log-density has an arrow shape: dense q x q head(s) per
// cluster, a diagonal month tail, and head-tail coupling only through the
// months a cluster was observed in.  Mode finding and log-determinants work
// on that structure directly, so a block solve costs O(sum q^3 + m^3)
// rather than anything dense in the total dimension.
class LaplaceEngine {
 public:
  explicit LaplaceEngine(const GlmmProblem& prob);
  ~LaplaceEngine();
  LaplaceEngine(const LaplaceEngine&) = delete;
  LaplaceEngine& operator=(const LaplaceEngine&) = delete;

  int n_independence_blocks() const;
  int block_dim(int block) const;
  // Offset of cluster k's head inside its block's mode vector.
  int head_offset(int block, int cluster_in_block) const;

  double joint_negloglik(const Eigen::VectorXd& theta, int block,
                         const Eigen::VectorXd& u) const;
  Eigen::VectorXd inner_gradient(const Eigen::VectorXd& theta, int block,
                                 const Eigen::VectorXd& u) const;
  Eigen::MatrixXd inner_hessian(const Eigen::VectorXd& theta, int block,
                                const Eigen::VectorXd& u) const;

  InnerResult inner_mode(const Eigen::VectorXd& theta, int block,
                         const InnerOptions& opts,
                         const Eigen::VectorXd* warm = nullptr) const;

  // Ordered (deterministic) reduction over blocks; `parallel` toggles the
  // OpenMP block loop, the serial path being the reference implementation.
  LogmargValue logmarg(const Eigen::VectorXd& theta, const InnerOptions& opts,
                       std::vector<Eigen::VectorXd>* warm_modes,
                       bool parallel) const;

  RawFit fit(const Eigen::VectorXd& init, const OuterOptions& opts) const;

  // Central-difference Hessian of the negative log marginal likelihood.
  Eigen::MatrixXd observed_info(const Eigen::VectorXd& theta,
                                const OuterOptions& opts) const;

  const GlmmProblem& problem() const;

  // Zeros except: intercept-looking first count column gets a crude
  // log-rate start, random-effect scales start at sd 0.2, zeta at sd 0.1.
  Eigen::VectorXd default_init() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Wald machinery from an observed-information matrix.  Coordinates touching
// non-positive-curvature directions get NaN standard errors instead of a
// failure.
struct WaldSummary {
  Eigen::VectorXd se;
  Eigen::VectorXd z;
  Eigen::VectorXd p_value;
  Eigen::MatrixXd cov;
  bool info_pd = false;
};
WaldSummary wald_from_info(const Eigen::MatrixXd& info,
                           const Eigen::VectorXd& theta);

struct InfoCriteria {
  double aic = 0.0;
  double bic = 0.0;
  double deviance = 0.0;
};
InfoCriteria info_criteria(double loglik, int n_parameters, long long n_obs);

// --- Spec-level entry points over (Dataset, ModelSpec) -------------------

// Joint negative log-density of one cluster's data and random effects,
// -sum log f(y|u) + u' Sigma^-1 u / 2 + log det(2 pi Sigma) / 2, where
// Sigma = blockdiag(G, sigma_zeta^2 I) per the spec's zeta mode.
double joint_negloglik(const ParamPack& params, const Eigen::VectorXd& u,
                       const Dataset& data, int cluster_index,
                       const ModelSpec& spec);
// Shared-month variant: one joint block over every cluster.
double joint_negloglik_shared(const ParamPack& params, const Eigen::VectorXd& u,
                              const Dataset& data, const ModelSpec& spec);

InnerResult inner_mode(const ParamPack& params, const Dataset& data,
                       int cluster_index, const ModelSpec& spec,
                       const InnerOptions& opts = {});

// Throws EvaluationError naming the block when an inner solve fails.
double laplace_logmarg(const ParamPack& params, const Dataset& data,
                       const ModelSpec& spec, bool parallel = true);

RawFit outer_fit(const Dataset& data, const ModelSpec& spec,
                 const ParamPack& init, const OuterOptions& opts = {});

}  // namespace segzip

#endif
