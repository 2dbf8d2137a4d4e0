#include "segzip/model.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segzip {

void ModelSpec::validate() const {
  if (p_count < 0 || p_zero < 1 || q_cluster < 0)
    throw std::invalid_argument("ModelSpec: bad dimensions");
  if (cp_mode.kind == ChangepointKind::Random &&
      cp_mode.bounds_rule == BoundsRule::Fixed && !cp_mode.bounds.valid())
    throw std::invalid_argument("ModelSpec: invalid changepoint bounds");
  if (random_lambda && cp_mode.kind != ChangepointKind::Random)
    throw std::invalid_argument(
        "ModelSpec: random_lambda requires a random changepoint");
  if (random_delta && cp_mode.kind == ChangepointKind::None)
    throw std::invalid_argument(
        "ModelSpec: random_delta requires a changepoint term");
}

ChangepointBounds ModelSpec::bounds_for(const Cluster& c) const {
  if (cp_mode.bounds_rule == BoundsRule::Fixed) return cp_mode.bounds;
  double lo = c.observations.front().t, hi = lo;
  for (const auto& o : c.observations) {
    lo = std::min(lo, o.t);
    hi = std::max(hi, o.t);
  }
  ChangepointBounds b{lo, hi};
  if (!b.valid())
    throw std::invalid_argument(
        "ModelSpec: cluster " + c.id + " has a degenerate time range");
  return b;
}

ChangepointBounds ModelSpec::population_bounds(const Dataset& data) const {
  if (cp_mode.bounds_rule == BoundsRule::Fixed) return cp_mode.bounds;
  if (data.time_levels.empty())
    throw std::invalid_argument("ModelSpec: empty dataset");
  ChangepointBounds b{data.time_levels.front(), data.time_levels.back()};
  if (!b.valid())
    throw std::invalid_argument("ModelSpec: degenerate panel time range");
  return b;
}

double ParamPack::delta(const ModelSpec& spec) const {
  if (!spec.has_delta())
    throw std::invalid_argument("ParamPack: model has no delta slot");
  return beta[spec.p_count];
}

double ParamPack::lambda(const ModelSpec& spec) const {
  if (!spec.has_lambda())
    throw std::invalid_argument("ParamPack: model has no lambda slot");
  return beta[spec.p_count + 1];
}

Eigen::VectorXd pack_params(const ParamPack& p, const ModelSpec& spec) {
  if (p.beta.size() != spec.n_count_coef() || p.gamma.size() != spec.p_zero ||
      p.chol_g.size() != spec.n_chol())
    throw std::invalid_argument("pack_params: dimension mismatch");
  Eigen::VectorXd flat(spec.n_params());
  int k = 0;
  flat.segment(k, p.beta.size()) = p.beta;
  k += static_cast<int>(p.beta.size());
  flat.segment(k, p.gamma.size()) = p.gamma;
  k += static_cast<int>(p.gamma.size());
  flat.segment(k, p.chol_g.size()) = p.chol_g;
  k += static_cast<int>(p.chol_g.size());
  if (spec.has_zeta()) flat[k++] = p.log_sigma_zeta;
  return flat;
}

ParamPack unpack_params(const Eigen::VectorXd& flat, const ModelSpec& spec) {
  if (flat.size() != spec.n_params())
    throw std::invalid_argument("unpack_params: dimension mismatch");
  ParamPack p;
  int k = 0;
  p.beta = flat.segment(k, spec.n_count_coef());
  k += spec.n_count_coef();
  p.gamma = flat.segment(k, spec.p_zero);
  k += spec.p_zero;
  p.chol_g = flat.segment(k, spec.n_chol());
  k += spec.n_chol();
  p.log_sigma_zeta = spec.has_zeta() ? flat[k] : 0.0;
  return p;
}

Eigen::MatrixXd chol_factor(const Eigen::VectorXd& chol_g, int q_total) {
  if (chol_g.size() != q_total * (q_total + 1) / 2)
    throw std::invalid_argument("chol_factor: length mismatch");
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(q_total, q_total);
  int k = 0;
  for (int i = 0; i < q_total; ++i)
    for (int j = 0; j <= i; ++j, ++k)
      l(i, j) = (i == j) ? std::exp(chol_g[k]) : chol_g[k];
  return l;
}

Eigen::MatrixXd cov_from_chol(const Eigen::VectorXd& chol_g, int q_total) {
  const Eigen::MatrixXd l = chol_factor(chol_g, q_total);
  return l * l.transpose();
}

Eigen::VectorXd chol_from_cov(const Eigen::MatrixXd& g) {
  const int q = static_cast<int>(g.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("chol_from_cov: matrix is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  Eigen::VectorXd out(q * (q + 1) / 2);
  int k = 0;
  for (int i = 0; i < q; ++i)
    for (int j = 0; j <= i; ++j, ++k)
      out[k] = (i == j) ? std::log(l(i, j)) : l(i, j);
  return out;
}

double eta_count(const ModelSpec& spec, const ParamPack& p,
                 const Observation& obs, const Eigen::VectorXd& randeff,
                 double seg_term) {
  if (static_cast<int>(obs.x_row.size()) != spec.p_count ||
      static_cast<int>(obs.z_row.size()) != spec.q_cluster)
    throw std::invalid_argument("eta_count: design row length mismatch");
  const int want = spec.q_total() + (spec.has_zeta() ? 1 : 0);
  if (randeff.size() != want)
    throw std::invalid_argument("eta_count: random-effect layout mismatch");
  double eta = std::log(obs.offset);
  for (int j = 0; j < spec.p_count; ++j) eta += obs.x_row[j] * p.beta[j];
  for (int j = 0; j < spec.q_cluster; ++j) eta += obs.z_row[j] * randeff[j];
  if (spec.has_delta()) {
    double delta_i = p.delta(spec);
    if (spec.random_delta) delta_i += randeff[spec.q_cluster];
    eta += delta_i * seg_term;
  }
  if (spec.has_zeta()) eta += randeff[want - 1];
  return eta;
}

double eta_zero(const ModelSpec& spec, const ParamPack& p,
                const Observation& obs) {
  if (static_cast<int>(obs.w_row.size()) != spec.p_zero)
    throw std::invalid_argument("eta_zero: design row length mismatch");
  double eta = 0.0;
  for (int j = 0; j < spec.p_zero; ++j) eta += obs.w_row[j] * p.gamma[j];
  return eta;
}

}  // namespace segzip
