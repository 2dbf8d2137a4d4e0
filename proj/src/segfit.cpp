#include "segzip/segfit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "segzip/errors.hpp"
#include "segzip/zip.hpp"

namespace segzip {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> coef_names(const ModelSpec& spec,
                                    const FitOptions& opts) {
  std::vector<std::string> names;
  for (int j = 0; j < spec.p_count; ++j) {
    if (j < static_cast<int>(opts.count_names.size()))
      names.push_back(opts.count_names[j]);
    else
      names.push_back("beta" + std::to_string(j));
  }
  if (spec.has_delta()) names.push_back("delta");
  if (spec.has_lambda()) names.push_back("lambda");
  for (int j = 0; j < spec.p_zero; ++j) {
    if (j < static_cast<int>(opts.zero_names.size()))
      names.push_back(opts.zero_names[j]);
    else
      names.push_back("gamma" + std::to_string(j));
  }
  return names;
}

// Clamp a changepoint into a cluster's open interval before the logistic
// inverse; exact endpoints get the same nudge.
double clamp_psi(double psi, const ChangepointBounds& b) {
  const double pad = 1e-6 * b.width();
  return std::min(std::max(psi, b.l1 + pad), b.l2 - pad);
}

// Insert the lambda coefficient (after delta) and, when l_i is random, a
// fresh covariance row: maps an initialization-layout parameter vector into
// the working-model layout.
Eigen::VectorXd embed_lambda(const Eigen::VectorXd& theta, int p_init,
                             int p_zero, int q_init, bool add_l, bool has_zeta,
                             double lambda0, double l_log_sd) {
  const int q_work = q_init + (add_l ? 1 : 0);
  const int n_work = (p_init + 1) + p_zero + q_work * (q_work + 1) / 2 +
                     (has_zeta ? 1 : 0);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_work);
  out.segment(0, p_init) = theta.segment(0, p_init);
  out[p_init] = lambda0;
  int k = p_init + 1;
  out.segment(k, p_zero) = theta.segment(p_init, p_zero);
  k += p_zero;
  const int nc_init = q_init * (q_init + 1) / 2;
  out.segment(k, nc_init) = theta.segment(p_init + p_zero, nc_init);
  k += nc_init;
  if (add_l) {
    for (int j = 0; j < q_init; ++j) out[k++] = 0.0;
    out[k++] = l_log_sd;
  }
  if (has_zeta) out[k] = theta[theta.size() - 1];
  return out;
}

// Inverse of embed_lambda.
Eigen::VectorXd drop_lambda(const Eigen::VectorXd& theta, int p_init,
                            int p_zero, int q_init, bool has_zeta) {
  const int n_init =
      p_init + p_zero + q_init * (q_init + 1) / 2 + (has_zeta ? 1 : 0);
  Eigen::VectorXd out(n_init);
  out.segment(0, p_init) = theta.segment(0, p_init);
  out.segment(p_init, p_zero) = theta.segment(p_init + 1, p_zero);
  const int nc_init = q_init * (q_init + 1) / 2;
  out.segment(p_init + p_zero, nc_init) =
      theta.segment(p_init + 1 + p_zero, nc_init);
  if (has_zeta) out[n_init - 1] = theta[theta.size() - 1];
  return out;
}

ModelSpec initialization_spec(const ModelSpec& spec, double psi0) {
  ModelSpec s = spec;
  s.cp_mode = ChangepointMode::known(psi0);
  s.random_lambda = false;
  return s;
}

GlmmProblem build_working_problem(const Dataset& data, const ModelSpec& spec,
                                  const PseudoCovariates& pseudo,
                                  bool frozen) {
  const std::size_t n = data.clusters.size();
  std::vector<std::vector<std::vector<double>>> ex(n), ez(n);
  std::vector<std::vector<double>> off(n);
  const int n_ex = frozen ? 1 : 2;
  const int n_ez = (spec.random_delta ? 1 : 0) +
                   ((!frozen && spec.random_lambda) ? 1 : 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t m = pseudo.u[i].size();
    if (m != data.clusters[i].observations.size())
      throw std::invalid_argument("working_fit: pseudo-covariates out of step");
    ex[i].resize(m);
    ez[i].resize(m);
    off[i].resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      if (frozen)
        ex[i][j] = {pseudo.u[i][j]};
      else
        ex[i][j] = {pseudo.u[i][j], pseudo.g_pc[i][j]};
      if (spec.random_delta) ez[i][j].push_back(pseudo.u[i][j]);
      if (!frozen && spec.random_lambda) ez[i][j].push_back(pseudo.g_pc[i][j]);
      off[i][j] = pseudo.o_star[i][j];
    }
  }
  ModelSpec base = spec;
  base.cp_mode = ChangepointMode::none();
  base.random_delta = false;
  base.random_lambda = false;
  return assemble_custom(data, base, n_ex, ex, n_ez, ez, &off);
}

struct RandomExtras {
  std::vector<double> lambda_hat;
  std::vector<ChangepointBounds> bounds;
  double lambda_pop = kNaN;
  ChangepointBounds pop_bounds;
  bool present = false;
};

// Fill a SegFitResult from a finished Laplace fit.  `layout` describes the
// packed layout of raw.theta (for random fits: the working layout, possibly
// re-embedded after a lambda freeze); `prob` is the problem the fit actually
// ran on (its q may be one short of layout's when lambda was frozen).
SegFitResult assemble_result(const Dataset& data, const ModelSpec& layout,
                             const ModelSpec& report, const RawFit& raw,
                             const GlmmProblem& prob, const FitOptions& opts,
                             const RandomExtras& extras, bool compute_se) {
  SegFitResult res;
  res.spec = report;
  res.theta = raw.theta;
  res.loglik = raw.loglik;
  res.rank_deficient = raw.rank_deficient;
  res.n_obs = data.n_observations();
  res.n_parameters = static_cast<int>(raw.theta.size());
  res.criteria = info_criteria(raw.loglik, res.n_parameters, res.n_obs);

  const int p = layout.n_count_coef();
  const int pz = layout.p_zero;
  const int q = layout.q_total();
  const int n_fix = p + pz;

  WaldSummary wald;
  if (compute_se) {
    const LaplaceEngine eng(prob);
    wald = wald_from_info(eng.observed_info(raw.theta, opts.outer), raw.theta);
  }

  const auto names = coef_names(layout, opts);
  for (int k = 0; k < n_fix; ++k) {
    FixedEffect fe;
    fe.name = names[k];
    fe.estimate = raw.theta[k];
    if (compute_se) {
      fe.se = wald.se[k];
      fe.p_value = wald.p_value[k];
    }
    res.fixed.push_back(fe);
  }
  if (report.cp_mode.kind == ChangepointKind::Known) {
    FixedEffect fe;
    fe.name = "psi_known";
    fe.estimate = report.cp_mode.psi;
    res.fixed.push_back(fe);
    res.population_changepoint = report.cp_mode.psi;
  }

  if (q > 0) {
    const Eigen::VectorXd chol = raw.theta.segment(n_fix, layout.n_chol());
    res.g_matrix = cov_from_chol(chol, q);
    res.g_correlations = Eigen::MatrixXd::Identity(q, q);
    for (int i = 0; i < q; ++i) {
      res.g_variances.push_back(res.g_matrix(i, i));
      for (int j = 0; j < i; ++j) {
        const double c = res.g_matrix(i, j) /
                         std::sqrt(res.g_matrix(i, i) * res.g_matrix(j, j));
        res.g_correlations(i, j) = res.g_correlations(j, i) = c;
      }
    }
    res.g_variance_se.assign(q, kNaN);
    if (compute_se) {
      const Eigen::MatrixXd l = chol_factor(chol, q);
      for (int k = 0; k < q; ++k) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(raw.theta.size());
        const int row_off = n_fix + k * (k + 1) / 2;
        bool usable = true;
        for (int j = 0; j <= k; ++j) {
          grad[row_off + j] =
              (j == k) ? 2.0 * l(k, k) * l(k, k) : 2.0 * l(k, j);
          if (!std::isfinite(wald.cov(row_off + j, row_off + j)))
            usable = false;
        }
        if (usable) {
          const double v = grad.dot(wald.cov * grad);
          if (v >= 0.0) res.g_variance_se[k] = std::sqrt(v);
        }
      }
    }
  } else {
    res.g_matrix.resize(0, 0);
    res.g_correlations.resize(0, 0);
  }
  if (layout.has_zeta())
    res.sigma_zeta2 = std::exp(2.0 * raw.theta[raw.theta.size() - 1]);

  // random-effect modes per cluster (prob.q may be < q after a freeze)
  const int q_fit = prob.q;
  const bool shared = layout.zeta_mode == ZetaMode::SharedMonth;
  res.cluster_modes.resize(data.clusters.size());
  for (std::size_t i = 0; i < data.clusters.size(); ++i) {
    ClusterModes& cm = res.cluster_modes[i];
    cm.id = data.clusters[i].id;
    cm.b = Eigen::VectorXd::Zero(q);
    const int take = std::min(q, q_fit);
    if (shared) {
      if (!raw.modes.empty() &&
          raw.modes[0].size() >= q_fit * static_cast<int>(i + 1))
        cm.b.head(take) =
            raw.modes[0].segment(static_cast<int>(i) * q_fit, take);
    } else if (i < raw.modes.size() && raw.modes[i].size() >= take) {
      cm.b.head(take) = raw.modes[i].head(take);
    }
    if (layout.random_delta) cm.d = cm.b[layout.q_cluster];
    if (layout.random_lambda)
      cm.l = cm.b[layout.q_cluster + (layout.random_delta ? 1 : 0)];
  }
  if (shared) {
    const int m = prob.n_months;
    if (!raw.modes.empty() &&
        raw.modes[0].size() ==
            q_fit * static_cast<int>(data.clusters.size()) + m) {
      res.shared_zeta = raw.modes[0].tail(m);
      res.shared_zeta_months.resize(m);
      for (int t = 0; t < m; ++t) res.shared_zeta_months[t] = t;
    }
  } else if (layout.zeta_mode == ZetaMode::PerClusterMonth) {
    for (std::size_t i = 0; i < data.clusters.size(); ++i) {
      ClusterModes& cm = res.cluster_modes[i];
      cm.zeta_months = prob.blocks[i].local_months;
      const int mt = static_cast<int>(cm.zeta_months.size());
      if (i < raw.modes.size() && raw.modes[i].size() == q_fit + mt)
        cm.zeta = raw.modes[i].tail(mt);
      else
        cm.zeta = Eigen::VectorXd::Zero(mt);
    }
  }

  if (extras.present) {
    res.lambda_hat = extras.lambda_pop;
    res.population_bounds = extras.pop_bounds;
    res.cluster_bounds = extras.bounds;
    res.cluster_changepoints.resize(extras.lambda_hat.size());
    for (std::size_t i = 0; i < extras.lambda_hat.size(); ++i)
      res.cluster_changepoints[i] =
          cp_from_lambda(extras.lambda_hat[i], extras.bounds[i]);
    res.population_changepoint =
        cp_from_lambda(extras.lambda_pop, extras.pop_bounds);
    if (compute_se) {
      const double se_lam = res.fixed[layout.p_count + 1].se;
      res.lambda_se = se_lam;
      res.population_changepoint_se =
          cp_derivative(extras.lambda_pop, extras.pop_bounds) * se_lam;
    }
  }

  return res;
}

}  // namespace

// ----------------------------------------------------------------------

SegFitResult fit_known(const Dataset& data, const ModelSpec& spec,
                       const FitOptions& opts, const ParamPack* init) {
  spec.validate();
  if (spec.cp_mode.kind == ChangepointKind::Random)
    throw std::invalid_argument(
        "fit_known: spec must not have a random changepoint");
  const GlmmProblem prob = assemble_problem(data, spec);
  const LaplaceEngine eng(prob);
  const Eigen::VectorXd theta0 =
      init ? pack_params(*init, spec) : eng.default_init();
  const RawFit raw = eng.fit(theta0, opts.outer);
  SegFitResult res = assemble_result(data, spec, spec, raw, prob, opts,
                                     RandomExtras{}, opts.compute_se);
  res.loglik_trace = {raw.loglik};
  res.iterations = 1;
  res.converged = raw.converged;
  res.mse = predict(res, data).mse;
  return res;
}

PseudoCovariates pseudo_step(const std::vector<double>& lambda_hat,
                             const std::vector<double>& delta_tilde,
                             const Dataset& data, const ModelSpec& spec) {
  if (spec.cp_mode.kind != ChangepointKind::Random)
    throw std::invalid_argument(
        "pseudo_step: spec must have a random changepoint");
  const std::size_t n = data.clusters.size();
  if (lambda_hat.size() != n || delta_tilde.size() != n)
    throw std::invalid_argument(
        "pseudo_step: per-cluster vectors must match data");
  PseudoCovariates pc;
  pc.lambda_hat = lambda_hat;
  pc.delta_tilde = delta_tilde;
  pc.u.resize(n);
  pc.v.resize(n);
  pc.g_pc.resize(n);
  pc.o_star.resize(n);
  pc.psi.resize(n);
  pc.bounds.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Cluster& c = data.clusters[i];
    const ChangepointBounds b = spec.bounds_for(c);
    const double psi = cp_from_lambda(lambda_hat[i], b);
    const double dpsi = cp_derivative(lambda_hat[i], b);
    pc.bounds[i] = b;
    pc.psi[i] = psi;
    const std::size_t m = c.observations.size();
    pc.u[i].resize(m);
    pc.v[i].resize(m);
    pc.g_pc[i].resize(m);
    pc.o_star[i].resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      const Observation& o = c.observations[j];
      if (!std::isfinite(o.t))
        throw std::invalid_argument("pseudo_step: non-finite time");
      const double u = seg_value(spec.seg_kind, o.t, psi);
      const double v = seg_dpsi(spec.seg_kind, o.t, psi) * dpsi;
      const double g = delta_tilde[i] * v;
      pc.u[i][j] = u;
      pc.v[i][j] = v;
      pc.g_pc[i][j] = g;
      pc.o_star[i][j] = std::log(o.offset) - lambda_hat[i] * g;
    }
  }
  return pc;
}

RawFit working_fit(const Dataset& data, const ModelSpec& spec,
                   const PseudoCovariates& pseudo,
                   const Eigen::VectorXd& init_theta, const FitOptions& opts,
                   bool* lambda_frozen) {
  if (spec.cp_mode.kind != ChangepointKind::Random)
    throw std::invalid_argument(
        "working_fit: spec must have a random changepoint");
  if (pseudo.u.size() != data.clusters.size())
    throw std::invalid_argument("working_fit: pseudo-covariates out of step");

  double max_g = 0.0;
  for (const auto& gc : pseudo.g_pc)
    for (double g : gc) max_g = std::max(max_g, std::abs(g));
  const bool frozen = max_g < 1e-10;
  if (lambda_frozen) *lambda_frozen = frozen;

  const GlmmProblem prob = build_working_problem(data, spec, pseudo, frozen);
  const LaplaceEngine eng(prob);

  Eigen::VectorXd theta0 = init_theta;
  if (frozen && init_theta.size() != prob.n_params()) {
    theta0 = drop_lambda(init_theta, spec.p_count + 1, spec.p_zero,
                         spec.q_cluster + (spec.random_delta ? 1 : 0),
                         spec.has_zeta());
  }
  if (theta0.size() != prob.n_params())
    throw std::invalid_argument("working_fit: init parameter length mismatch");
  return eng.fit(theta0, opts.outer);
}

// ----------------------------------------------------------------------

namespace {

struct AlgoState {
  RawFit raw;
  PseudoCovariates pc;
  bool frozen = false;
  std::vector<double> lambda_hat, delta_tilde;
  double lambda_pop = kNaN;
  double loglik = -std::numeric_limits<double>::infinity();
};

SegFitResult run_algorithm(const Dataset& data, const ModelSpec& spec,
                           double psi0, const RawFit* init_fit_cached,
                           const FitOptions& opts) {
  spec.validate();
  if (spec.cp_mode.kind != ChangepointKind::Random)
    throw std::invalid_argument(
        "fit_random: spec must have a random changepoint");
  const std::size_t n = data.clusters.size();

  std::vector<ChangepointBounds> bounds(n);
  for (std::size_t i = 0; i < n; ++i)
    bounds[i] = spec.bounds_for(data.clusters[i]);
  const ChangepointBounds pop_bounds = spec.population_bounds(data);

  // Initialization: the known-changepoint model at psi0 (U column only)
  const ModelSpec ispec = initialization_spec(spec, psi0);
  RawFit init_raw;
  if (init_fit_cached) {
    init_raw = *init_fit_cached;
  } else {
    const LaplaceEngine eng(assemble_problem(data, ispec));
    init_raw = eng.fit(eng.default_init(), opts.outer);
  }
  if (!std::isfinite(init_raw.loglik))
    throw std::runtime_error("fit_random: initialization fit failed");

  const int p_init = ispec.n_count_coef();
  const int q_init = ispec.q_total();

  std::vector<double> lambda_hat(n), delta_tilde(n);
  const double delta0 = init_raw.theta[spec.p_count];
  for (std::size_t i = 0; i < n; ++i) {
    lambda_hat[i] = lambda_from_cp(clamp_psi(psi0, bounds[i]), bounds[i]);
    double d_mode = 0.0;
    if (spec.random_delta && i < init_raw.modes.size() &&
        init_raw.modes[i].size() > spec.q_cluster)
      d_mode = init_raw.modes[i][spec.q_cluster];
    delta_tilde[i] = delta0 + d_mode;
  }
  double lambda0 = 0.0;
  for (double l : lambda_hat) lambda0 += l;
  lambda0 /= static_cast<double>(n);

  std::vector<double> trace = {init_raw.loglik};
  Eigen::VectorXd theta_prev =
      embed_lambda(init_raw.theta, p_init, spec.p_zero, q_init,
                   spec.random_lambda, spec.has_zeta(), lambda0,
                   std::log(0.3));

  AlgoState cur, best;
  bool converged = false;
  bool any_frozen = false;

  for (int r = 1; r <= opts.max_algorithm_iterations; ++r) {
    PseudoCovariates pc = pseudo_step(lambda_hat, delta_tilde, data, spec);
    bool frozen = false;
    try {
      cur.raw = working_fit(data, spec, pc, theta_prev, opts, &frozen);
    } catch (const std::exception&) {
      break;  // keep the best iterate, flagged as non-converged
    }
    any_frozen = any_frozen || frozen;
    cur.frozen = frozen;
    cur.pc = std::move(pc);
    cur.loglik = cur.raw.loglik;

    const double delta_hat = cur.raw.theta[spec.p_count];
    if (!frozen) {
      cur.lambda_pop = cur.raw.theta[spec.p_count + 1];
      theta_prev = cur.raw.theta;
    } else {
      cur.lambda_pop = lambda0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double d_mode = 0.0, l_mode = 0.0;
      if (i < cur.raw.modes.size()) {
        const auto& m = cur.raw.modes[i];
        if (spec.random_delta && m.size() > spec.q_cluster)
          d_mode = m[spec.q_cluster];
        if (!frozen && spec.random_lambda &&
            m.size() > spec.q_cluster + (spec.random_delta ? 1 : 0))
          l_mode = m[spec.q_cluster + (spec.random_delta ? 1 : 0)];
      }
      delta_tilde[i] = delta_hat + d_mode;
      if (!frozen) lambda_hat[i] = cur.lambda_pop + l_mode;
    }
    cur.lambda_hat = lambda_hat;
    cur.delta_tilde = delta_tilde;

    trace.push_back(cur.loglik);
    if (std::isfinite(cur.loglik) && cur.loglik > best.loglik) best = cur;

    const double prev = trace[trace.size() - 2];
    const double rel =
        std::abs(cur.loglik - prev) / std::max(std::abs(prev), 1e-300);
    if (rel < opts.rel_loglik_tol) {
      converged = true;
      break;
    }
  }

  const AlgoState& fin = converged ? cur : best;
  if (!std::isfinite(fin.loglik))
    throw std::runtime_error("fit_random: no working fit succeeded");

  RandomExtras extras;
  extras.present = true;
  extras.lambda_hat = fin.lambda_hat;
  extras.bounds = bounds;
  extras.lambda_pop = fin.lambda_pop;
  extras.pop_bounds = pop_bounds;

  RawFit final_raw = fin.raw;
  const int n_fitted = static_cast<int>(final_raw.theta.size());
  if (fin.frozen) {
    // report in the full working layout; the lambda coefficient and its
    // covariance row are carried, not estimated
    final_raw.theta =
        embed_lambda(final_raw.theta, p_init, spec.p_zero, q_init,
                     spec.random_lambda, spec.has_zeta(), fin.lambda_pop,
                     std::log(0.3));
  }
  const GlmmProblem final_prob =
      build_working_problem(data, spec, fin.pc, fin.frozen);

  const bool want_se = opts.compute_se && !fin.frozen;
  SegFitResult res = assemble_result(data, spec, spec, final_raw, final_prob,
                                     opts, extras, want_se);
  res.n_parameters = n_fitted;
  res.criteria = info_criteria(fin.loglik, n_fitted, res.n_obs);
  res.loglik_trace = trace;
  res.iterations = static_cast<int>(trace.size());
  res.converged = converged && fin.raw.converged;
  res.lambda_frozen = any_frozen;
  res.mse = predict(res, data).mse;
  return res;
}

}  // namespace

SegFitResult fit_random(const Dataset& data, const ModelSpec& spec,
                        double init_psi, const FitOptions& opts) {
  return run_algorithm(data, spec, init_psi, nullptr, opts);
}

SegFitResult fit_random(const Dataset& data, const ModelSpec& spec,
                        const GridOptions& grid, const FitOptions& opts) {
  const GridResult g = grid_init(data, spec, grid, opts);
  return run_algorithm(data, spec, g.chosen_psi, &g.chosen_fit, opts);
}

GridResult grid_init(const Dataset& data, const ModelSpec& spec,
                     const GridOptions& grid, const FitOptions& opts) {
  spec.validate();
  if (spec.cp_mode.kind != ChangepointKind::Random)
    throw std::invalid_argument(
        "grid_init: spec must have a random changepoint");
  if (!(grid.step > 0.0))
    throw std::invalid_argument("grid_init: step must be positive");
  const ChangepointBounds pb = spec.population_bounds(data);

  std::vector<double> psis;
  const double tol = 1e-9 * pb.width();
  for (double v = pb.l1; v <= pb.l2 + tol; v += grid.step)
    psis.push_back(std::min(v, pb.l2));
  if (psis.back() < pb.l2 - tol) psis.push_back(pb.l2);

  const int nc = static_cast<int>(psis.size());
  std::vector<GridCandidate> table(nc);
  std::vector<RawFit> raws(nc);
  std::vector<char> ok(nc, 0);

  FitOptions copts = opts;
  copts.compute_se = false;
  if (grid.per_candidate_max_iterations > 0)
    copts.outer.bfgs.max_iterations = grid.per_candidate_max_iterations;

  const int chunk = std::max(1, grid.chunk);
  const int n_chunks = (nc + chunk - 1) / chunk;

#pragma omp parallel for schedule(dynamic) if (n_chunks > 1)
  for (int ch = 0; ch < n_chunks; ++ch) {
    Eigen::VectorXd warm;
    bool have_warm = false;
    for (int k = ch * chunk; k < std::min(nc, (ch + 1) * chunk); ++k) {
      table[k].psi = psis[k];
      try {
        const ModelSpec ispec = initialization_spec(spec, psis[k]);
        const GlmmProblem prob = assemble_problem(data, ispec);
        const LaplaceEngine eng(prob);
        const Eigen::VectorXd init = have_warm ? warm : eng.default_init();
        RawFit raw = eng.fit(init, copts.outer);
        table[k].loglik = raw.loglik;
        table[k].converged = raw.converged;
        const SegFitResult tmp = assemble_result(
            data, ispec, ispec, raw, prob, copts, RandomExtras{}, false);
        table[k].mse = predict(tmp, data).mse;
        warm = raw.theta;
        have_warm = true;
        raws[k] = std::move(raw);
        ok[k] = 1;
      } catch (const std::exception&) {
        table[k].failed = true;
        have_warm = false;
      }
    }
  }

  GridResult res;
  res.table = table;
  int chosen = -1;
  for (int k = 0; k < nc; ++k) {
    if (!ok[k] || !std::isfinite(table[k].mse)) continue;
    // ties break to the smaller psi, which the ascending scan gives
    if (chosen < 0 || table[k].mse < table[chosen].mse) chosen = k;
  }
  if (chosen < 0) {
    int failures = 0;
    for (const auto& c : table) failures += c.failed ? 1 : 0;
    throw std::runtime_error("grid_init: all " + std::to_string(failures) +
                             " candidate fits failed");
  }
  res.chosen_index = chosen;
  res.chosen_psi = psis[chosen];
  res.chosen_fit = std::move(raws[chosen]);
  return res;
}

Predictions predict(const SegFitResult& fit, const Dataset& data) {
  const ModelSpec& spec = fit.spec;
  const ParamPack pars = unpack_params(fit.theta, spec);
  const std::size_t n = data.clusters.size();
  if (fit.cluster_modes.size() != n)
    throw std::invalid_argument("predict: fit and data cluster counts differ");

  Predictions out;
  out.y_hat.resize(n);
  out.mu_hat.resize(n);
  out.pi_hat.resize(n);
  const int q = spec.q_total();
  const int re_len = q + (spec.has_zeta() ? 1 : 0);
  double sse = 0.0;
  long long cnt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Cluster& c = data.clusters[i];
    const ClusterModes& cm = fit.cluster_modes[i];
    out.y_hat[i].resize(c.observations.size());
    out.mu_hat[i].resize(c.observations.size());
    out.pi_hat[i].resize(c.observations.size());
    Eigen::VectorXd re = Eigen::VectorXd::Zero(re_len);
    if (cm.b.size() == q) re.head(q) = cm.b;
    for (std::size_t j = 0; j < c.observations.size(); ++j) {
      const Observation& o = c.observations[j];
      double seg = 0.0;
      if (spec.cp_mode.kind == ChangepointKind::Known)
        seg = seg_value(spec.seg_kind, o.t, spec.cp_mode.psi);
      else if (spec.cp_mode.kind == ChangepointKind::Random)
        seg = seg_value(spec.seg_kind, o.t, fit.cluster_changepoints[i]);
      if (spec.has_zeta()) {
        double zeta = 0.0;
        const int lvl = data.time_level_index(o.t);
        if (spec.zeta_mode == ZetaMode::SharedMonth) {
          if (lvl < fit.shared_zeta.size()) zeta = fit.shared_zeta[lvl];
        } else {
          for (std::size_t s = 0; s < cm.zeta_months.size(); ++s)
            if (cm.zeta_months[s] == lvl) {
              zeta = cm.zeta[s];
              break;
            }
        }
        re[re_len - 1] = zeta;
      }
      const double eta = eta_count(spec, pars, o, re, seg);
      const double mu = std::exp(eta);
      const double pi = inv_logit(eta_zero(spec, pars, o));
      const double yhat = (1.0 - pi) * mu;
      out.mu_hat[i][j] = mu;
      out.pi_hat[i][j] = pi;
      out.y_hat[i][j] = yhat;
      const double r = static_cast<double>(o.y) - yhat;
      sse += r * r;
      ++cnt;
    }
  }
  out.mse = cnt > 0 ? sse / static_cast<double>(cnt) : kNaN;
  return out;
}

}  // namespace segzip
