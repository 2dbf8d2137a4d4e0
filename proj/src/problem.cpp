#include "segzip/problem.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace segzip {

ModelSpec GlmmProblem::layout() const {
  ModelSpec s;
  s.p_count = p;
  s.p_zero = p_zero;
  s.q_cluster = q;
  s.cp_mode = ChangepointMode::none();
  s.zeta_mode = zeta_mode;
  return s;
}

void GlmmProblem::finalize() {
  for (auto& b : blocks) {
    b.lgam_y.resize(b.n_obs());
    for (int j = 0; j < b.n_obs(); ++j)
      b.lgam_y[j] = std::lgamma(b.y[j] + 1.0);
    b.month_local.clear();
    b.local_months.clear();
    if (zeta_mode == ZetaMode::None) continue;
    b.month_local.resize(b.n_obs());
    for (int j = 0; j < b.n_obs(); ++j) {
      const int m = b.month[j];
      auto it = std::find(b.local_months.begin(), b.local_months.end(), m);
      if (it == b.local_months.end()) {
        b.local_months.push_back(m);
        b.month_local[j] = static_cast<int>(b.local_months.size()) - 1;
      } else {
        b.month_local[j] = static_cast<int>(it - b.local_months.begin());
      }
    }
  }
}

bool GlmmProblem::rank_deficient() const {
  const long long n = n_obs();
  auto rank_of = [&](auto getter, int cols) {
    if (cols == 0) return true;  // vacuously full rank
    Eigen::MatrixXd stacked(n, cols);
    long long r = 0;
    for (const auto& b : blocks) {
      stacked.middleRows(r, b.n_obs()) = getter(b);
      r += b.n_obs();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stacked);
    qr.setThreshold(1e-9);
    return qr.rank() == cols;
  };
  const bool x_ok =
      rank_of([](const ProblemBlock& b) { return b.x; }, p);
  const bool w_ok =
      rank_of([](const ProblemBlock& b) { return b.w; }, p_zero);
  return !(x_ok && w_ok);
}

GlmmProblem assemble_problem(const Dataset& data, const ModelSpec& spec) {
  spec.validate();
  if (spec.cp_mode.kind == ChangepointKind::Random)
    throw std::invalid_argument(
        "assemble_problem: random changepoints are fit through the "
        "linearization driver, not direct assembly");
  const bool known = spec.cp_mode.kind == ChangepointKind::Known;
  std::vector<std::vector<std::vector<double>>> extra_x, extra_z;
  if (known) {
    extra_x.resize(data.clusters.size());
    if (spec.random_delta) extra_z.resize(data.clusters.size());
    for (std::size_t i = 0; i < data.clusters.size(); ++i) {
      const auto& c = data.clusters[i];
      extra_x[i].resize(c.observations.size());
      if (spec.random_delta) extra_z[i].resize(c.observations.size());
      for (std::size_t j = 0; j < c.observations.size(); ++j) {
        const double u =
            seg_value(spec.seg_kind, c.observations[j].t, spec.cp_mode.psi);
        extra_x[i][j] = {u};
        if (spec.random_delta) extra_z[i][j] = {u};
      }
    }
  }
  return assemble_custom(data, spec, known ? 1 : 0, extra_x,
                         (known && spec.random_delta) ? 1 : 0, extra_z,
                         nullptr);
}

GlmmProblem assemble_custom(
    const Dataset& data, const ModelSpec& base, int n_extra_x,
    const std::vector<std::vector<std::vector<double>>>& extra_x,
    int n_extra_z,
    const std::vector<std::vector<std::vector<double>>>& extra_z,
    const std::vector<std::vector<double>>* log_offset_override) {
  GlmmProblem prob;
  prob.p = base.p_count + n_extra_x;
  prob.p_zero = base.p_zero;
  prob.q = base.q_cluster + n_extra_z;
  prob.zeta_mode = base.zeta_mode;
  prob.n_months = base.has_zeta() ? static_cast<int>(data.time_levels.size()) : 0;
  prob.blocks.resize(data.clusters.size());
  for (std::size_t i = 0; i < data.clusters.size(); ++i) {
    const auto& c = data.clusters[i];
    auto& blk = prob.blocks[i];
    const int n = static_cast<int>(c.observations.size());
    blk.cluster_id = c.id;
    blk.y.resize(n);
    blk.log_offset.resize(n);
    blk.x.resize(n, prob.p);
    blk.w.resize(n, prob.p_zero);
    blk.z.resize(n, prob.q);
    if (base.has_zeta()) blk.month.resize(n);
    for (int j = 0; j < n; ++j) {
      const auto& o = c.observations[j];
      if (static_cast<int>(o.x_row.size()) != base.p_count ||
          static_cast<int>(o.w_row.size()) != base.p_zero ||
          static_cast<int>(o.z_row.size()) != base.q_cluster)
        throw std::invalid_argument("assemble: design row length mismatch");
      blk.y[j] = static_cast<double>(o.y);
      blk.log_offset[j] = log_offset_override
                              ? (*log_offset_override)[i][j]
                              : std::log(o.offset);
      for (int k = 0; k < base.p_count; ++k) blk.x(j, k) = o.x_row[k];
      for (int k = 0; k < n_extra_x; ++k)
        blk.x(j, base.p_count + k) = extra_x[i][j][k];
      for (int k = 0; k < base.p_zero; ++k) blk.w(j, k) = o.w_row[k];
      for (int k = 0; k < base.q_cluster; ++k) blk.z(j, k) = o.z_row[k];
      for (int k = 0; k < n_extra_z; ++k)
        blk.z(j, base.q_cluster + k) = extra_z[i][j][k];
      if (base.has_zeta()) blk.month[j] = data.time_level_index(o.t);
    }
  }
  prob.finalize();
  return prob;
}

}  // namespace segzip
