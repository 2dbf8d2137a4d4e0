#ifndef SEGZIP_PROBLEM_HPP
#define SEGZIP_PROBLEM_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "segzip/model.hpp"

namespace segzip {

// One cluster of a fully assembled ZIP mixed model: every changepoint /
// pseudo-covariate construction has already been folded into the design
// matrices and the per-observation log offset, so the estimation layer only
// ever sees a linear predictor
//   eta_ij = log_offset_ij + X_ij' beta + Z_ij' b_i + zeta[month_ij].
struct ProblemBlock {
  std::string cluster_id;
  Eigen::VectorXd y;           // counts
  Eigen::VectorXd log_offset;  // includes any pseudo-offset correction
  Eigen::MatrixXd x;           // n_i x p
  Eigen::MatrixXd w;           // n_i x p_zero
  Eigen::MatrixXd z;           // n_i x q (q may be 0)
  std::vector<int> month;      // global month level per observation

  // Filled by GlmmProblem::finalize().
  Eigen::VectorXd lgam_y;         // lgamma(y + 1)
  std::vector<int> month_local;   // per-observation index into local_months
  std::vector<int> local_months;  // distinct global levels in this cluster

  int n_obs() const { return static_cast<int>(y.size()); }
};

struct GlmmProblem {
  std::vector<ProblemBlock> blocks;
  int p = 0;
  int p_zero = 0;
  int q = 0;
  ZetaMode zeta_mode = ZetaMode::None;
  int n_months = 0;  // global month levels (0 when zeta_mode == None)

  bool has_zeta() const { return zeta_mode != ZetaMode::None; }
  int n_chol() const { return q * (q + 1) / 2; }
  int n_params() const {
    return p + p_zero + n_chol() + (has_zeta() ? 1 : 0);
  }
  long long n_obs() const {
    long long n = 0;
    for (const auto& b : blocks) n += b.n_obs();
    return n;
  }

  // Parameter layout is the ModelSpec one with all count columns already
  // present: beta(p), gamma(p_zero), chol(q(q+1)/2), log_sigma_zeta?.
  ModelSpec layout() const;

  // Precompute month compression and lgamma(y+1); call after the blocks are
  // in place.
  void finalize();

  // Stacked-design column rank check (count and zero model separately);
  // true when either design is rank deficient.
  bool rank_deficient() const;
};

// Assemble the estimation problem for a spec with a known (or absent)
// changepoint: the segmented covariate f(t, psi) is appended to X (and to Z
// when delta is random).  Random-changepoint specs are linearized by the
// segfit layer instead, which builds its own problem.
GlmmProblem assemble_problem(const Dataset& data, const ModelSpec& spec);

// Shared low-level assembly: append the given per-observation extra count
// columns (and random columns) to the base design.  extra_x / extra_z are
// indexed [cluster][obs][column].
GlmmProblem assemble_custom(
    const Dataset& data, const ModelSpec& base, int n_extra_x,
    const std::vector<std::vector<std::vector<double>>>& extra_x,
    int n_extra_z,
    const std::vector<std::vector<std::vector<double>>>& extra_z,
    const std::vector<std::vector<double>>* log_offset_override);

}  // namespace segzip

#endif
