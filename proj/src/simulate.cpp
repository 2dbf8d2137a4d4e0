#include "segzip/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "segzip/zip.hpp"

namespace segzip {

void ScenarioConfig::validate() const {
  if (n_clusters < 1 || m_per_cluster < 2)
    throw std::invalid_argument("ScenarioConfig: need n >= 1 and m >= 2");
  if (sd_b0 < 0 || sd_b1 < 0 || sd_d < 0 || sd_l < 0 || x_sd < 0)
    throw std::invalid_argument("ScenarioConfig: negative sd");
  if (bounds_rule == BoundsRule::Fixed && !fixed_bounds.valid())
    throw std::invalid_argument("ScenarioConfig: invalid fixed bounds");
}

ScenarioConfig ScenarioConfig::scenario1(int n, int m, std::uint64_t seed) {
  ScenarioConfig c;
  c.n_clusters = n;
  c.m_per_cluster = m;
  c.master_seed = seed;
  return c;  // defaults are the Scenario-1 truth
}

ScenarioConfig ScenarioConfig::scenario2(int n, int m, std::uint64_t seed) {
  ScenarioConfig c;
  c.n_clusters = n;
  c.m_per_cluster = m;
  c.gamma0 = 0.5;
  c.beta1 = -0.2;
  c.delta = -0.2;
  c.lambda = 2.0;
  c.seg_kind = SegmentationKind::Quadratic;
  c.master_seed = seed;
  return c;
}

void CrbsiConfig::validate() const {
  if (n_hospitals < 1 || n_months < 2)
    throw std::invalid_argument("CrbsiConfig: need hospitals and months");
  if (missing_prob < 0 || missing_prob >= 1)
    throw std::invalid_argument("CrbsiConfig: missing_prob outside [0,1)");
  if (!bounds.valid()) throw std::invalid_argument("CrbsiConfig: bad bounds");
  if (sd_b0 < 0 || sd_b1 < 0 || sd_d < 0 || sd_l < 0 || sigma_zeta < 0)
    throw std::invalid_argument("CrbsiConfig: negative sd");
}

SimulatedData gen_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  SimulatedData out;
  out.dataset.clusters.resize(cfg.n_clusters);
  out.truth.b0.resize(cfg.n_clusters);
  out.truth.b1.resize(cfg.n_clusters);
  out.truth.d.resize(cfg.n_clusters);
  out.truth.l.resize(cfg.n_clusters);
  out.truth.psi.resize(cfg.n_clusters);
  out.truth.bounds.resize(cfg.n_clusters);
  out.truth.structural_zero.resize(cfg.n_clusters);
  Rng rng(cfg.master_seed);
  const double pi = inv_logit(cfg.gamma0);
  for (int i = 0; i < cfg.n_clusters; ++i) {
    Cluster& c = out.dataset.clusters[i];
    c.id = "c" + std::to_string(i + 1);
    std::vector<double> x(cfg.m_per_cluster);
    for (double& v : x) v = rng.normal(cfg.x_mean, cfg.x_sd);
    const double b0 = rng.normal(0.0, cfg.sd_b0);
    const double b1 = rng.normal(0.0, cfg.sd_b1);
    const double d = rng.normal(0.0, cfg.sd_d);
    const double l = rng.normal(0.0, cfg.sd_l);
    ChangepointBounds b = cfg.fixed_bounds;
    if (cfg.bounds_rule == BoundsRule::PerClusterMinMax) {
      b.l1 = *std::min_element(x.begin(), x.end());
      b.l2 = *std::max_element(x.begin(), x.end());
    }
    const double psi = cp_from_lambda(cfg.lambda + l, b);
    out.truth.b0[i] = b0;
    out.truth.b1[i] = b1;
    out.truth.d[i] = d;
    out.truth.l[i] = l;
    out.truth.psi[i] = psi;
    out.truth.bounds[i] = b;
    out.truth.structural_zero[i].resize(cfg.m_per_cluster);
    c.observations.resize(cfg.m_per_cluster);
    for (int j = 0; j < cfg.m_per_cluster; ++j) {
      Observation& o = c.observations[j];
      o.t = x[j];
      o.offset = 1.0;
      o.x_row = {1.0, x[j]};
      o.w_row = {1.0};
      o.z_row = {1.0, x[j]};
      const double eta = (cfg.beta0 + b0) + (cfg.beta1 + b1) * x[j] +
                         (cfg.delta + d) * seg_value(cfg.seg_kind, x[j], psi);
      const bool structural = pi > 0.0 && rng.bernoulli(pi);
      out.truth.structural_zero[i][j] = structural;
      o.y = structural ? 0 : rng.poisson(std::exp(eta));
    }
  }
  out.dataset.rebuild_time_levels();
  return out;
}

SimulatedData gen_crbsi(const CrbsiConfig& cfg) {
  cfg.validate();
  SimulatedData out;
  Rng rng(cfg.master_seed);
  out.truth.b0.resize(cfg.n_hospitals);
  out.truth.b1.resize(cfg.n_hospitals);
  out.truth.d.resize(cfg.n_hospitals);
  out.truth.l.resize(cfg.n_hospitals);
  out.truth.psi.resize(cfg.n_hospitals);
  out.truth.bounds.assign(cfg.n_hospitals, cfg.bounds);
  out.truth.structural_zero.resize(cfg.n_hospitals);
  out.truth.type_private.resize(cfg.n_hospitals);
  out.dataset.clusters.resize(cfg.n_hospitals);
  const bool shared_zeta = cfg.zeta_mode == ZetaMode::SharedMonth;
  std::vector<double> shared(cfg.n_months, 0.0);
  if (shared_zeta && cfg.sigma_zeta > 0.0)
    for (double& z : shared) z = rng.normal(0.0, cfg.sigma_zeta);
  if (shared_zeta) out.truth.zeta = shared;

  for (int i = 0; i < cfg.n_hospitals; ++i) {
    Cluster& c = out.dataset.clusters[i];
    c.id = "h" + std::to_string(i + 1);
    const int priv = rng.bernoulli(cfg.type_prevalence) ? 1 : 0;
    const double b0 = rng.normal(0.0, cfg.sd_b0);
    const double b1 = rng.normal(0.0, cfg.sd_b1);
    const double d = rng.normal(0.0, cfg.sd_d);
    const double l =
        cfg.known_changepoint ? 0.0 : rng.normal(0.0, cfg.sd_l);
    const double psi = cfg.known_changepoint
                           ? cfg.known_psi
                           : cp_from_lambda(cfg.lambda + l, cfg.bounds);
    out.truth.type_private[i] = priv;
    out.truth.b0[i] = b0;
    out.truth.b1[i] = b1;
    out.truth.d[i] = d;
    out.truth.l[i] = l;
    out.truth.psi[i] = psi;
    std::vector<double> zeta_i = shared;
    if (!shared_zeta) {
      zeta_i.assign(cfg.n_months, 0.0);
      if (cfg.zeta_mode == ZetaMode::PerClusterMonth && cfg.sigma_zeta > 0.0) {
        for (double& z : zeta_i) z = rng.normal(0.0, cfg.sigma_zeta);
        out.truth.zeta.insert(out.truth.zeta.end(), zeta_i.begin(),
                              zeta_i.end());
      }
    }
    const double pi = inv_logit(cfg.gamma0 + cfg.gamma1 * priv);
    for (int t = 1; t <= cfg.n_months; ++t) {
      if (cfg.missing_prob > 0.0 && rng.bernoulli(cfg.missing_prob)) continue;
      Observation o;
      o.t = static_cast<double>(t);
      o.offset = std::exp(cfg.exposure_log_median +
                          (cfg.exposure_log_sd > 0.0
                               ? rng.normal(0.0, cfg.exposure_log_sd)
                               : 0.0));
      o.x_row = {1.0, o.t, static_cast<double>(priv)};
      o.w_row = {1.0, static_cast<double>(priv)};
      o.z_row = {1.0, o.t};
      const double eta = std::log(o.offset) + (cfg.beta0 + b0) +
                         (cfg.beta1 + b1) * o.t + cfg.beta2 * priv +
                         (cfg.delta + d) * seg_value(cfg.seg_kind, o.t, psi) +
                         zeta_i[t - 1];
      const bool structural = pi > 0.0 && rng.bernoulli(pi);
      out.truth.structural_zero[i].push_back(structural);
      o.y = structural ? 0 : rng.poisson(std::exp(eta));
      c.observations.push_back(o);
    }
    if (c.observations.empty()) {
      // keep the panel non-degenerate under heavy missingness
      Observation o;
      o.t = 1.0;
      o.offset = std::exp(cfg.exposure_log_median);
      o.x_row = {1.0, 1.0, static_cast<double>(priv)};
      o.w_row = {1.0, static_cast<double>(priv)};
      o.z_row = {1.0, 1.0};
      o.y = 0;
      out.truth.structural_zero[i].push_back(false);
      c.observations.push_back(o);
    }
  }
  out.dataset.rebuild_time_levels();
  return out;
}

ModelSpec scenario_fit_spec(const ScenarioConfig& cfg) {
  ModelSpec spec;
  spec.p_count = 2;
  spec.p_zero = 1;
  spec.q_cluster = 2;
  spec.seg_kind = cfg.seg_kind;
  spec.cp_mode = cfg.bounds_rule == BoundsRule::PerClusterMinMax
                     ? ChangepointMode::random_per_cluster()
                     : ChangepointMode::random(cfg.fixed_bounds);
  spec.random_delta = true;
  spec.random_lambda = true;
  spec.zeta_mode = ZetaMode::None;
  return spec;
}

ModelSpec crbsi_fit_spec(const CrbsiConfig& cfg) {
  ModelSpec spec;
  spec.p_count = 3;
  spec.p_zero = 2;
  spec.q_cluster = 2;
  spec.seg_kind = cfg.seg_kind;
  if (cfg.known_changepoint)
    spec.cp_mode = ChangepointMode::known(cfg.known_psi);
  else
    spec.cp_mode = ChangepointMode::random(cfg.bounds);
  spec.random_delta = true;
  spec.random_lambda = !cfg.known_changepoint;
  spec.zeta_mode = cfg.zeta_mode;
  return spec;
}

}  // namespace segzip
