#ifndef SEGZIP_SIMULATE_HPP
#define SEGZIP_SIMULATE_HPP

#include <cstdint>
#include <vector>

#include "segzip/data.hpp"
#include "segzip/model.hpp"
#include "segzip/rng.hpp"

namespace segzip {

// Scenario generator: per cluster, x ~ N(x_mean, x_sd), random effects
// (b0, b1, d, l) independent centered normals, changepoint
// psi_i = g(lambda + l_i) on the cluster's own x-range (or fixed bounds),
// log mu = (beta0+b0) + (beta1+b1) x + (delta+d) f(x, psi_i),
// logit pi = gamma0, offset = 1.
struct ScenarioConfig {
  int n_clusters = 300;
  int m_per_cluster = 20;
  double beta0 = 1.0;
  double beta1 = 0.2;
  double delta = 0.2;
  double lambda = 5.0;
  double gamma0 = -0.5;
  double sd_b0 = 0.1, sd_b1 = 0.1, sd_d = 0.1, sd_l = 0.1;
  SegmentationKind seg_kind = SegmentationKind::Linear;
  BoundsRule bounds_rule = BoundsRule::PerClusterMinMax;
  ChangepointBounds fixed_bounds;  // used when bounds_rule == Fixed
  double x_mean = 5.0;
  double x_sd = 1.0;
  std::uint64_t master_seed = 1;

  void validate() const;

  static ScenarioConfig scenario1(int n, int m, std::uint64_t seed);
  static ScenarioConfig scenario2(int n, int m, std::uint64_t seed);
};

// CR-BSI-style generator (hospitals over 48 months with exposures, hospital
// type in both linear predictors, and a systemic month effect).
struct CrbsiConfig {
  int n_hospitals = 61;
  int n_months = 48;
  double missing_prob = 0.0;       // per (hospital, month) dropout
  double type_prevalence = 0.5;    // P(private)
  double exposure_log_median = 5.7038;  // log 300
  double exposure_log_sd = 0.5;    // 0: constant exposure
  // log mu = log O + (b0+beta0) + (b1+beta1) t + beta2 N
  //          + (delta+d) f(t, psi_i) + zeta_t ; logit pi = gamma0 + gamma1 N
  double beta0 = -5.275;
  double beta1 = -0.013;
  double beta2 = -0.942;
  double delta = 0.022;
  double lambda = 0.274;
  double gamma0 = -5.564;
  double gamma1 = 2.348;
  double sd_b0 = 0.674, sd_b1 = 0.026, sd_d = 0.063, sd_l = 0.522;
  double sigma_zeta = 0.063;
  SegmentationKind seg_kind = SegmentationKind::Linear;
  ChangepointBounds bounds{1.0, 48.0};
  ZetaMode zeta_mode = ZetaMode::PerClusterMonth;
  bool known_changepoint = false;  // true: psi fixed at known_psi, no l_i
  double known_psi = 39.0;
  std::uint64_t master_seed = 1;

  void validate() const;
};

// Everything the generator drew, for oracle evaluation at the truth.
struct SimTruth {
  std::vector<double> b0, b1, d, l;        // per cluster
  std::vector<double> psi;                 // realized changepoints
  std::vector<ChangepointBounds> bounds;   // per cluster
  std::vector<std::vector<bool>> structural_zero;  // [cluster][obs]
  std::vector<double> zeta;                // month effects (crbsi)
  std::vector<int> type_private;           // per cluster (crbsi)
};

struct SimulatedData {
  Dataset dataset;
  SimTruth truth;
};

SimulatedData gen_scenario(const ScenarioConfig& cfg);
SimulatedData gen_crbsi(const CrbsiConfig& cfg);

// Fitting spec matching the scenario generator's model.
ModelSpec scenario_fit_spec(const ScenarioConfig& cfg);
// Fitting spec matching the CR-BSI generator (covid1 when the changepoint
// is known, covid2 otherwise).
ModelSpec crbsi_fit_spec(const CrbsiConfig& cfg);

}  // namespace segzip

#endif
