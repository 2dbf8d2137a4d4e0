#ifndef SEGZIP_MODEL_HPP
#define SEGZIP_MODEL_HPP

#include <Eigen/Core>

#include "segzip/data.hpp"
#include "segzip/segfun.hpp"

namespace segzip {

enum class ChangepointKind { None, Known, Random };

// Rule resolving the (l1, l2) interval of the logistic changepoint
// transform: one fixed pair for the whole panel, or each cluster's observed
// time range (the simulation scenarios use the latter).
enum class BoundsRule { Fixed, PerClusterMinMax };

struct ChangepointMode {
  ChangepointKind kind = ChangepointKind::None;
  double psi = 0.0;                // Known
  BoundsRule bounds_rule = BoundsRule::Fixed;
  ChangepointBounds bounds;        // Random + Fixed

  static ChangepointMode none() { return {}; }
  static ChangepointMode known(double psi_value) {
    ChangepointMode m;
    m.kind = ChangepointKind::Known;
    m.psi = psi_value;
    return m;
  }
  static ChangepointMode random(ChangepointBounds b) {
    ChangepointMode m;
    m.kind = ChangepointKind::Random;
    m.bounds = b;
    return m;
  }
  static ChangepointMode random_per_cluster() {
    ChangepointMode m;
    m.kind = ChangepointKind::Random;
    m.bounds_rule = BoundsRule::PerClusterMinMax;
    return m;
  }
};

// Systemic month effect zeta: absent, one i.i.d. vector per cluster (the
// likelihood's literal reading), or a single vector shared by every cluster
// observed in the same month (crossed).
enum class ZetaMode { None, PerClusterMonth, SharedMonth };

// Declarative model layout.  delta (the post-changepoint slope) and lambda
// (the transformed changepoint) ride in the count-model fixed-effect block
// when the changepoint mode calls for them; d_i / l_i extend the per-cluster
// random effects.
struct ModelSpec {
  int p_count = 0;    // columns of x_row
  int p_zero = 0;     // columns of w_row
  int q_cluster = 0;  // columns of z_row
  SegmentationKind seg_kind = SegmentationKind::Linear;
  ChangepointMode cp_mode;
  bool random_delta = false;
  bool random_lambda = false;
  ZetaMode zeta_mode = ZetaMode::None;

  bool has_delta() const { return cp_mode.kind != ChangepointKind::None; }
  bool has_lambda() const { return cp_mode.kind == ChangepointKind::Random; }
  bool has_zeta() const { return zeta_mode != ZetaMode::None; }
  int n_count_coef() const {
    return p_count + (has_delta() ? 1 : 0) + (has_lambda() ? 1 : 0);
  }
  int q_total() const {
    return q_cluster + (random_delta ? 1 : 0) + (random_lambda ? 1 : 0);
  }
  int n_chol() const { return q_total() * (q_total() + 1) / 2; }
  int n_params() const {
    return n_count_coef() + p_zero + n_chol() + (has_zeta() ? 1 : 0);
  }

  void validate() const;

  // Changepoint interval for one cluster (min/max of its times under
  // PerClusterMinMax).  Only meaningful in Random mode.
  ChangepointBounds bounds_for(const Cluster& c) const;
  // Panel-level interval used for the population changepoint and the
  // initialization grid.
  ChangepointBounds population_bounds(const Dataset& data) const;
};

// Structured parameter set matching a ModelSpec.
//
// beta holds the count-model fixed effects with delta as the last-but-one
// slot and lambda as the last slot when the spec calls for them.  chol_g is
// the log-Cholesky of the random-effect covariance G (row-major lower
// triangle, diagonal entries stored as logs), so reconstructed G is
// symmetric positive definite for any real input.
struct ParamPack {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd chol_g;
  double log_sigma_zeta = 0.0;

  double delta(const ModelSpec& spec) const;
  double lambda(const ModelSpec& spec) const;
};

Eigen::VectorXd pack_params(const ParamPack& p, const ModelSpec& spec);
ParamPack unpack_params(const Eigen::VectorXd& flat, const ModelSpec& spec);

// G = L L^T from the log-Cholesky vector.
Eigen::MatrixXd cov_from_chol(const Eigen::VectorXd& chol_g, int q_total);
// Inverse map (Cholesky then log the diagonal); requires G positive definite.
Eigen::VectorXd chol_from_cov(const Eigen::MatrixXd& g);
// Lower-triangular L itself.
Eigen::MatrixXd chol_factor(const Eigen::VectorXd& chol_g, int q_total);

// Count-model linear predictor for one observation:
//   log(offset) + x'beta + z'b + (delta + d_i) * seg_term + zeta_month.
// randeff is laid out [b (q_cluster), d_i?, l_i?, zeta_month?]; the trailing
// zeta entry is present iff the spec has a month effect.
double eta_count(const ModelSpec& spec, const ParamPack& p,
                 const Observation& obs, const Eigen::VectorXd& randeff,
                 double seg_term);

// Zero-model linear predictor w'gamma.
double eta_zero(const ModelSpec& spec, const ParamPack& p,
                const Observation& obs);

}  // namespace segzip

#endif
