#include "segzip/laplace.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "segzip/errors.hpp"
#include "segzip/zip.hpp"

namespace segzip {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

double logsumexp2(double a, double b) {
  const double m = a > b ? a : b;
  const double d = (a > b ? b : a) - m;
  return m + std::log1p(std::exp(d));
}

// Unpacked parameter vector with derived prior quantities.
struct ThetaCtx {
  Eigen::VectorXd beta, gamma;
  Eigen::MatrixXd g_inv;
  double logdet_g = 0.0;
  double zeta_prec = 0.0;
  double log_sigma_zeta2 = 0.0;
  bool ok = false;
};

ThetaCtx make_ctx(const GlmmProblem& prob, const Eigen::VectorXd& theta) {
  ThetaCtx c;
  if (theta.size() != prob.n_params())
    throw std::invalid_argument("laplace: parameter vector length mismatch");
  if (!theta.allFinite()) return c;
  int k = 0;
  c.beta = theta.segment(k, prob.p);
  k += prob.p;
  c.gamma = theta.segment(k, prob.p_zero);
  k += prob.p_zero;
  const int q = prob.q;
  if (q > 0) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(q, q);
    double logdet = 0.0;
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j <= i; ++j, ++k) {
        if (i == j) {
          if (theta[k] > 300.0) return c;  // exp would swamp everything
          l(i, i) = std::exp(theta[k]);
          logdet += 2.0 * theta[k];
        } else {
          l(i, j) = theta[k];
        }
      }
    }
    const Eigen::MatrixXd l_inv =
        l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(q, q));
    c.g_inv = l_inv.transpose() * l_inv;
    if (!c.g_inv.allFinite()) return c;
    c.logdet_g = logdet;
  }
  if (prob.has_zeta()) {
    const double lsz = theta[k];
    if (std::abs(lsz) > 300.0) return c;
    c.log_sigma_zeta2 = 2.0 * lsz;
    c.zeta_prec = std::exp(-2.0 * lsz);
  }
  c.ok = true;
  return c;
}

// Independence block: one cluster, or (shared month effect) all of them.
struct BlockDesc {
  std::vector<int> clusters;
  int tail_dim = 0;
  bool tail_global = false;
  int dim = 0;
};

// Arrow-shaped Hessian of one block: dense head(s), diagonal tail, head-tail
// coupling through the months each cluster touches.
struct ArrowPieces {
  std::vector<Eigen::MatrixXd> heads;  // q x q, prior G^-1 included
  std::vector<Eigen::MatrixXd> b;      // q x tail_dim
  Eigen::VectorXd d;                   // tail diagonal, prior included
  int q = 0;
};

struct ArrowFactor {
  bool tail_first = true;  // eliminate the diagonal tail (single head / q=0)
  Eigen::LLT<Eigen::MatrixXd> s_head;
  Eigen::VectorXd d_inv;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> h_llt;
  Eigen::LLT<Eigen::MatrixXd> s_tail;
  double logdet = 0.0;
};

double llt_logdet(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (int i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

bool arrow_factorize(const ArrowPieces& ap, double tau, ArrowFactor& f) {
  const int q = ap.q;
  const int tail = static_cast<int>(ap.d.size());
  f.logdet = 0.0;
  f.tail_first = (ap.heads.size() <= 1 || q == 0);
  if (f.tail_first) {
    f.d_inv.resize(tail);
    for (int t = 0; t < tail; ++t) {
      const double dt = ap.d[t] + tau;
      if (!(dt > 0.0) || !std::isfinite(dt)) return false;
      f.d_inv[t] = 1.0 / dt;
      f.logdet += std::log(dt);
    }
    if (!ap.heads.empty() && q > 0) {
      Eigen::MatrixXd s = ap.heads[0];
      s.diagonal().array() += tau;
      if (tail > 0)
        s.noalias() -= ap.b[0] * f.d_inv.asDiagonal() * ap.b[0].transpose();
      if (!s.allFinite()) return false;
      f.s_head.compute(s);
      if (f.s_head.info() != Eigen::Success) return false;
      const double ld = llt_logdet(f.s_head);
      if (!std::isfinite(ld)) return false;
      f.logdet += ld;
    }
    return std::isfinite(f.logdet);
  }
  // many heads, shared tail: eliminate the heads
  Eigen::MatrixXd st = Eigen::MatrixXd::Zero(tail, tail);
  for (int t = 0; t < tail; ++t) {
    const double dt = ap.d[t] + tau;
    if (!(dt > 0.0)) return false;  // D is a principal submatrix
    st(t, t) = dt;
  }
  f.h_llt.resize(ap.heads.size());
  for (std::size_t i = 0; i < ap.heads.size(); ++i) {
    Eigen::MatrixXd h = ap.heads[i];
    h.diagonal().array() += tau;
    if (!h.allFinite()) return false;
    f.h_llt[i].compute(h);
    if (f.h_llt[i].info() != Eigen::Success) return false;
    f.logdet += llt_logdet(f.h_llt[i]);
    st.noalias() -= ap.b[i].transpose() * f.h_llt[i].solve(ap.b[i]);
  }
  if (!st.allFinite()) return false;
  f.s_tail.compute(st);
  if (f.s_tail.info() != Eigen::Success) return false;
  f.logdet += llt_logdet(f.s_tail);
  return std::isfinite(f.logdet);
}

// x = H^-1 rhs on the arrow structure.
void arrow_solve(const ArrowPieces& ap, const ArrowFactor& f,
                 const Eigen::VectorXd& rhs, Eigen::VectorXd& x) {
  const int q = ap.q;
  const int tail = static_cast<int>(ap.d.size());
  const int n_heads = static_cast<int>(ap.heads.size());
  x.resize(rhs.size());
  if (f.tail_first) {
    if (n_heads == 0 || q == 0) {
      x = rhs.cwiseProduct(f.d_inv);
      return;
    }
    const auto rh = rhs.head(q);
    Eigen::VectorXd v = rh;
    if (tail > 0) {
      const Eigen::VectorXd rt_scaled = rhs.tail(tail).cwiseProduct(f.d_inv);
      v.noalias() -= ap.b[0] * rt_scaled;
    }
    x.head(q) = f.s_head.solve(v);
    if (tail > 0) {
      Eigen::VectorXd rt = rhs.tail(tail);
      rt.noalias() -= ap.b[0].transpose() * x.head(q);
      x.tail(tail) = rt.cwiseProduct(f.d_inv);
    }
    return;
  }
  Eigen::VectorXd rhs_t = rhs.tail(tail);
  std::vector<Eigen::VectorXd> t(n_heads);
  for (int i = 0; i < n_heads; ++i) {
    t[i] = f.h_llt[i].solve(rhs.segment(i * q, q));
    rhs_t.noalias() -= ap.b[i].transpose() * t[i];
  }
  const Eigen::VectorXd xt = f.s_tail.solve(rhs_t);
  for (int i = 0; i < n_heads; ++i)
    x.segment(i * q, q) = t[i] - f.h_llt[i].solve(ap.b[i] * xt);
  x.tail(tail) = xt;
}

Eigen::MatrixXd arrow_dense(const ArrowPieces& ap) {
  const int q = ap.q;
  const int tail = static_cast<int>(ap.d.size());
  const int nh = static_cast<int>(ap.heads.size());
  const int dim = nh * q + tail;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < nh; ++i) {
    h.block(i * q, i * q, q, q) = ap.heads[i];
    if (tail > 0) {
      h.block(i * q, nh * q, q, tail) = ap.b[i];
      h.block(nh * q, i * q, tail, q) = ap.b[i].transpose();
    }
  }
  for (int t = 0; t < tail; ++t) h(nh * q + t, nh * q + t) += ap.d[t];
  return h;
}

struct ClusterScratch {
  Eigen::VectorXd eta0;      // log_offset + X beta
  Eigen::VectorXd etaz;      // W gamma
  Eigen::VectorXd log1mpi;   // -log(1 + e^etaz)
};

struct Workspace {
  std::vector<ClusterScratch> sc;
  ArrowPieces pieces;
  Eigen::VectorXd grad, u, u_try, dir;
  bool sized = false;
};

}  // namespace

// ----------------------------------------------------------------------
// engine

struct LaplaceEngine::Impl {
  GlmmProblem prob;
  std::vector<BlockDesc> descs;
  mutable std::vector<Workspace> ws;

  explicit Impl(const GlmmProblem& p) : prob(p) {
    const int n = static_cast<int>(prob.blocks.size());
    if (prob.zeta_mode == ZetaMode::SharedMonth) {
      BlockDesc d;
      d.clusters.resize(n);
      for (int i = 0; i < n; ++i) d.clusters[i] = i;
      d.tail_dim = prob.n_months;
      d.tail_global = true;
      d.dim = n * prob.q + d.tail_dim;
      descs.push_back(std::move(d));
    } else {
      descs.resize(n);
      for (int i = 0; i < n; ++i) {
        descs[i].clusters = {i};
        descs[i].tail_dim =
            prob.zeta_mode == ZetaMode::PerClusterMonth
                ? static_cast<int>(prob.blocks[i].local_months.size())
                : 0;
        descs[i].dim = prob.q + descs[i].tail_dim;
      }
    }
    ws.resize(descs.size());
  }

  void prepare_theta(int block, const ThetaCtx& ctx, Workspace& w) const {
    const BlockDesc& desc = descs[block];
    w.sc.resize(desc.clusters.size());
    for (std::size_t k = 0; k < desc.clusters.size(); ++k) {
      const ProblemBlock& blk = prob.blocks[desc.clusters[k]];
      ClusterScratch& sc = w.sc[k];
      sc.eta0 = blk.log_offset;
      if (prob.p > 0) sc.eta0.noalias() += blk.x * ctx.beta;
      sc.etaz.resize(blk.n_obs());
      if (prob.p_zero > 0)
        sc.etaz.noalias() = blk.w * ctx.gamma;
      else
        sc.etaz.setZero();
      sc.log1mpi.resize(blk.n_obs());
      for (int j = 0; j < blk.n_obs(); ++j)
        sc.log1mpi[j] = -log1pexp(sc.etaz[j]);
    }
  }

  // Conditional -loglik plus Gaussian prior terms; +inf when the linear
  // predictor leaves the representable range.
  double eval_h(int block, const ThetaCtx& ctx, const Workspace& w,
                const Eigen::VectorXd& u) const {
    const BlockDesc& desc = descs[block];
    const int q = prob.q;
    const int tail_off = static_cast<int>(desc.clusters.size()) * q;
    double h = 0.0;
    for (std::size_t k = 0; k < desc.clusters.size(); ++k) {
      const ProblemBlock& blk = prob.blocks[desc.clusters[k]];
      const ClusterScratch& sc = w.sc[k];
      const auto head = u.segment(static_cast<int>(k) * q, q);
      for (int j = 0; j < blk.n_obs(); ++j) {
        double eta = sc.eta0[j];
        if (q > 0) eta += blk.z.row(j).dot(head);
        if (desc.tail_dim > 0) {
          const int t = desc.tail_global ? blk.month[j] : blk.month_local[j];
          eta += u[tail_off + t];
        }
        if (eta > 500.0) return kInf;
        const double mu = std::exp(eta);
        if (blk.y[j] > 0.0) {
          h += mu - blk.y[j] * eta + blk.lgam_y[j] - sc.log1mpi[j];
        } else {
          h += log1pexp(sc.etaz[j]) - logsumexp2(sc.etaz[j], -mu);
        }
      }
      if (q > 0) {
        h += 0.5 * head.dot(ctx.g_inv * head) +
             0.5 * (q * kLog2Pi + ctx.logdet_g);
      }
    }
    if (desc.tail_dim > 0) {
      const auto tail = u.tail(desc.tail_dim);
      h += 0.5 * ctx.zeta_prec * tail.squaredNorm() +
           0.5 * desc.tail_dim * (kLog2Pi + ctx.log_sigma_zeta2);
    }
    return h;
  }

  // Single pass computing h, the gradient, and the arrow Hessian pieces.
  double eval_full(int block, const ThetaCtx& ctx, Workspace& w,
                   const Eigen::VectorXd& u) const {
    const BlockDesc& desc = descs[block];
    const int q = prob.q;
    const int nh = static_cast<int>(desc.clusters.size());
    const int tail_off = nh * q;
    const int tail = desc.tail_dim;

    ArrowPieces& ap = w.pieces;
    ap.q = q;
    ap.heads.assign(q > 0 ? nh : 0, Eigen::MatrixXd());
    ap.b.assign(q > 0 ? nh : 0, Eigen::MatrixXd());
    ap.d.setConstant(tail, ctx.zeta_prec);
    w.grad.setZero(desc.dim);
    if (tail > 0)
      w.grad.tail(tail) = ctx.zeta_prec * u.tail(tail);

    double h = 0.0;
    for (int k = 0; k < nh; ++k) {
      const ProblemBlock& blk = prob.blocks[desc.clusters[k]];
      const ClusterScratch& sc = w.sc[k];
      const auto head = u.segment(k * q, q);
      Eigen::MatrixXd* hm = nullptr;
      Eigen::MatrixXd* bm = nullptr;
      if (q > 0) {
        ap.heads[k] = ctx.g_inv;
        ap.b[k] = Eigen::MatrixXd::Zero(q, tail);
        hm = &ap.heads[k];
        bm = &ap.b[k];
        w.grad.segment(k * q, q).noalias() = ctx.g_inv * head;
      }
      for (int j = 0; j < blk.n_obs(); ++j) {
        double eta = sc.eta0[j];
        if (q > 0) eta += blk.z.row(j).dot(head);
        int t = -1;
        if (tail > 0) {
          t = desc.tail_global ? blk.month[j] : blk.month_local[j];
          eta += u[tail_off + t];
        }
        if (eta > 500.0) return kInf;
        const double mu = std::exp(eta);
        double gs, hs;
        if (blk.y[j] > 0.0) {
          h += mu - blk.y[j] * eta + blk.lgam_y[j] - sc.log1mpi[j];
          gs = mu - blk.y[j];
          hs = mu;
        } else {
          h += log1pexp(sc.etaz[j]) - logsumexp2(sc.etaz[j], -mu);
          const double wz = inv_logit(-(sc.etaz[j] + mu));
          gs = mu * wz;
          hs = gs * (1.0 - mu * (1.0 - wz));
        }
        if (q > 0) {
          const auto zr = blk.z.row(j);
          for (int a = 0; a < q; ++a) {
            w.grad[k * q + a] += gs * zr[a];
            for (int c = 0; c <= a; ++c) (*hm)(a, c) += hs * zr[a] * zr[c];
          }
          if (t >= 0)
            for (int a = 0; a < q; ++a) (*bm)(a, t) += hs * zr[a];
        }
        if (t >= 0) {
          w.grad[tail_off + t] += gs;
          ap.d[t] += hs;
        }
      }
      if (q > 0) {
        hm->triangularView<Eigen::StrictlyUpper>() =
            hm->transpose().triangularView<Eigen::StrictlyUpper>();
        // same accumulation order as eval_h, so both return identical values
        h += 0.5 * head.dot(ctx.g_inv * head) +
             0.5 * (q * kLog2Pi + ctx.logdet_g);
      }
    }
    if (tail > 0) {
      h += 0.5 * ctx.zeta_prec * u.tail(tail).squaredNorm() +
           0.5 * tail * (kLog2Pi + ctx.log_sigma_zeta2);
    }
    return h;
  }

  InnerResult solve_block(int block, const ThetaCtx& ctx,
                          const InnerOptions& opts,
                          const Eigen::VectorXd* warm) const {
    Workspace& w = ws[block];
    const BlockDesc& desc = descs[block];
    InnerResult res;
    res.mode.setZero(desc.dim);
    if (!ctx.ok) return res;
    prepare_theta(block, ctx, w);
    if (desc.dim == 0) {
      // nothing to integrate: h is the exact conditional -loglik
      res.h_at_mode = eval_h(block, ctx, w, res.mode);
      res.logdet_hessian = 0.0;
      res.converged = std::isfinite(res.h_at_mode);
      return res;
    }

    Eigen::VectorXd u =
        (warm && warm->size() == desc.dim) ? *warm : Eigen::VectorXd::Zero(desc.dim);
    double h = eval_full(block, ctx, w, u);
    if (!std::isfinite(h) && u.squaredNorm() > 0.0) {
      u.setZero();
      h = eval_full(block, ctx, w, u);
    }
    if (!std::isfinite(h)) return res;
    if (opts.record_trace) res.h_trace.push_back(h);

    double tau = 0.0;
    ArrowFactor fac;
    bool gave_up = false;
    while (res.iterations < opts.max_iterations) {
      if (w.grad.lpNorm<Eigen::Infinity>() <= opts.tol) {
        res.converged = true;
        break;
      }
      // direction, damping the Hessian until it factors
      while (!arrow_factorize(w.pieces, tau, fac)) {
        tau = tau == 0.0 ? 1e-6 : tau * 10.0;
        if (tau > 1e10) {
          gave_up = true;
          break;
        }
      }
      if (gave_up) break;
      arrow_solve(w.pieces, fac, w.grad, w.dir);
      w.dir = -w.dir;

      double alpha = 1.0;
      bool accepted = false;
      double h_try = kInf;
      for (int hv = 0; hv < 40; ++hv) {
        w.u_try = u + alpha * w.dir;
        h_try = eval_h(block, ctx, w, w.u_try);
        if (std::isfinite(h_try) && h_try < h) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (accepted) {
        u = w.u_try;
        h = eval_full(block, ctx, w, u);
        if (!std::isfinite(h)) break;
        ++res.iterations;
        if (opts.record_trace) res.h_trace.push_back(h);
        tau *= 0.1;
        if (tau < 1e-10) tau = 0.0;
      } else {
        tau = tau == 0.0 ? 1e-6 : tau * 10.0;
        if (tau > 1e10) break;
      }
    }

    res.mode = u;
    res.h_at_mode = h;
    if (!std::isfinite(h)) {
      res.converged = false;
      return res;
    }
    if (res.converged || w.grad.lpNorm<Eigen::Infinity>() <= opts.tol)
      res.converged = true;
    // log det of the undamped Hessian at the mode (tiny jitter ladder as a
    // last resort near semidefiniteness)
    double jitter = 0.0;
    bool factored = false;
    for (int attempt = 0; attempt < 5 && !factored; ++attempt) {
      factored = arrow_factorize(w.pieces, jitter, fac);
      jitter = jitter == 0.0 ? 1e-10 : jitter * 100.0;
    }
    if (factored) {
      res.logdet_hessian = fac.logdet;
    } else {
      res.converged = false;
    }
    if (opts.want_dense_hessian) res.hessian = arrow_dense(w.pieces);
    return res;
  }
};

LaplaceEngine::LaplaceEngine(const GlmmProblem& prob)
    : impl_(std::make_unique<Impl>(prob)) {}
LaplaceEngine::~LaplaceEngine() = default;

int LaplaceEngine::n_independence_blocks() const {
  return static_cast<int>(impl_->descs.size());
}

int LaplaceEngine::block_dim(int block) const {
  return impl_->descs.at(block).dim;
}

int LaplaceEngine::head_offset(int block, int cluster_in_block) const {
  (void)block;
  return cluster_in_block * impl_->prob.q;
}

const GlmmProblem& LaplaceEngine::problem() const { return impl_->prob; }

double LaplaceEngine::joint_negloglik(const Eigen::VectorXd& theta, int block,
                                      const Eigen::VectorXd& u) const {
  const ThetaCtx ctx = make_ctx(impl_->prob, theta);
  if (!ctx.ok) return kInf;
  if (u.size() != impl_->descs.at(block).dim)
    throw std::invalid_argument("joint_negloglik: random-effect layout mismatch");
  Workspace& w = impl_->ws[block];
  impl_->prepare_theta(block, ctx, w);
  return impl_->eval_h(block, ctx, w, u);
}

Eigen::VectorXd LaplaceEngine::inner_gradient(const Eigen::VectorXd& theta,
                                              int block,
                                              const Eigen::VectorXd& u) const {
  const ThetaCtx ctx = make_ctx(impl_->prob, theta);
  if (!ctx.ok) throw std::invalid_argument("inner_gradient: bad parameters");
  Workspace& w = impl_->ws[block];
  impl_->prepare_theta(block, ctx, w);
  if (!std::isfinite(impl_->eval_full(block, ctx, w, u)))
    throw EvaluationError("inner_gradient: predictor overflow", block);
  return w.grad;
}

Eigen::MatrixXd LaplaceEngine::inner_hessian(const Eigen::VectorXd& theta,
                                             int block,
                                             const Eigen::VectorXd& u) const {
  const ThetaCtx ctx = make_ctx(impl_->prob, theta);
  if (!ctx.ok) throw std::invalid_argument("inner_hessian: bad parameters");
  Workspace& w = impl_->ws[block];
  impl_->prepare_theta(block, ctx, w);
  if (!std::isfinite(impl_->eval_full(block, ctx, w, u)))
    throw EvaluationError("inner_hessian: predictor overflow", block);
  return arrow_dense(w.pieces);
}

InnerResult LaplaceEngine::inner_mode(const Eigen::VectorXd& theta, int block,
                                      const InnerOptions& opts,
                                      const Eigen::VectorXd* warm) const {
  const ThetaCtx ctx = make_ctx(impl_->prob, theta);
  return impl_->solve_block(block, ctx, opts, warm);
}

LogmargValue LaplaceEngine::logmarg(const Eigen::VectorXd& theta,
                                    const InnerOptions& opts,
                                    std::vector<Eigen::VectorXd>* warm_modes,
                                    bool parallel) const {
  const int nb = n_independence_blocks();
  const ThetaCtx ctx = make_ctx(impl_->prob, theta);
  LogmargValue out;
  if (!ctx.ok) return out;
  if (warm_modes && static_cast<int>(warm_modes->size()) != nb)
    warm_modes->assign(nb, Eigen::VectorXd());

  std::vector<double> contrib(nb, kInf);
  std::vector<char> good(nb, 0);

#pragma omp parallel for schedule(static) if (parallel && nb > 1)
  for (int b = 0; b < nb; ++b) {
    const Eigen::VectorXd* warm =
        warm_modes ? &(*warm_modes)[b] : nullptr;
    const InnerResult r = impl_->solve_block(b, ctx, opts, warm);
    if (r.converged && std::isfinite(r.h_at_mode) &&
        std::isfinite(r.logdet_hessian)) {
      contrib[b] = -r.h_at_mode + 0.5 * block_dim(b) * kLog2Pi -
                   0.5 * r.logdet_hessian;
      good[b] = 1;
      if (warm_modes) (*warm_modes)[b] = r.mode;
    }
  }

  double total = 0.0;
  for (int b = 0; b < nb; ++b) {  // ordered reduction
    if (!good[b]) {
      out.failed_block = b;
      return out;
    }
    total += contrib[b];
  }
  out.value = total;
  out.ok = std::isfinite(total);
  return out;
}

Eigen::VectorXd LaplaceEngine::default_init() const {
  const GlmmProblem& prob = impl_->prob;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(prob.n_params());
  if (prob.p > 0) {
    bool intercept = true;
    double sum_y = 0.0, sum_off = 0.0;
    for (const auto& blk : prob.blocks) {
      for (int j = 0; j < blk.n_obs(); ++j) {
        if (std::abs(blk.x(j, 0) - 1.0) > 1e-12) intercept = false;
        sum_y += blk.y[j];
        sum_off += std::exp(blk.log_offset[j]);
      }
    }
    if (intercept && sum_off > 0.0)
      theta[0] = std::log((sum_y + 0.5) / sum_off);
  }
  const double log_sd0 = std::log(0.2);
  int k = prob.p + prob.p_zero;
  for (int i = 0; i < prob.q; ++i)
    for (int j = 0; j <= i; ++j, ++k)
      if (i == j) theta[k] = log_sd0;
  if (prob.has_zeta()) theta[prob.n_params() - 1] = std::log(0.1);
  return theta;
}

RawFit LaplaceEngine::fit(const Eigen::VectorXd& init,
                          const OuterOptions& opts) const {
  std::vector<Eigen::VectorXd> warm;
  auto objective = [&](const Eigen::VectorXd& theta) -> double {
    const LogmargValue lm =
        logmarg(theta, opts.inner, opts.warm_start ? &warm : nullptr,
                opts.parallel);
    return lm.ok ? -lm.value : kInf;
  };
  {
    const double f0 = objective(init);
    if (!std::isfinite(f0))
      throw std::invalid_argument(
          "outer_fit: marginal likelihood not finite at the initial value");
  }
  const BfgsResult bres = bfgs_minimize(objective, init, opts.bfgs);

  RawFit out;
  out.theta = bres.x;
  out.converged = bres.converged;
  out.n_outer_iterations = bres.iterations;
  out.n_evals = bres.n_evals;
  const LogmargValue lm = logmarg(bres.x, opts.inner, &warm, opts.parallel);
  out.loglik = lm.value;
  out.modes = warm;
  out.rank_deficient = impl_->prob.rank_deficient();
  return out;
}

Eigen::MatrixXd LaplaceEngine::observed_info(const Eigen::VectorXd& theta,
                                             const OuterOptions& opts) const {
  std::vector<Eigen::VectorXd> warm;
  auto objective = [&](const Eigen::VectorXd& th) -> double {
    const LogmargValue lm =
        logmarg(th, opts.inner, opts.warm_start ? &warm : nullptr,
                opts.parallel);
    return lm.ok ? -lm.value : kInf;
  };
  objective(theta);  // seed the warm modes at the expansion point
  long long evals = 0;
  return fd_hessian(objective, theta, &evals);
}

// ----------------------------------------------------------------------

WaldSummary wald_from_info(const Eigen::MatrixXd& info,
                           const Eigen::VectorXd& theta) {
  const int n = static_cast<int>(info.rows());
  WaldSummary s;
  s.se = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  s.z = s.se;
  s.p_value = s.se;
  s.cov = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  if (!info.allFinite()) return s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  if (es.info() != Eigen::Success) return s;
  const Eigen::VectorXd ev = es.eigenvalues();
  const double thresh = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  s.info_pd = (ev.minCoeff() > thresh);
  // coordinates loading on non-positive-curvature directions are unavailable
  std::vector<bool> bad(n, false);
  for (int d = 0; d < n; ++d) {
    if (ev[d] > thresh) continue;
    for (int k = 0; k < n; ++k)
      if (std::abs(es.eigenvectors()(k, d)) > 1e-7) bad[k] = true;
  }
  Eigen::VectorXd inv_ev = Eigen::VectorXd::Zero(n);
  for (int d = 0; d < n; ++d)
    if (ev[d] > thresh) inv_ev[d] = 1.0 / ev[d];
  const Eigen::MatrixXd cov =
      es.eigenvectors() * inv_ev.asDiagonal() * es.eigenvectors().transpose();
  s.cov = cov;
  for (int k = 0; k < n; ++k) {
    if (bad[k] || !(cov(k, k) > 0.0)) continue;
    s.se[k] = std::sqrt(cov(k, k));
    s.z[k] = theta[k] / s.se[k];
    s.p_value[k] = std::erfc(std::abs(s.z[k]) / std::sqrt(2.0));
  }
  return s;
}

InfoCriteria info_criteria(double loglik, int n_parameters, long long n_obs) {
  if (n_parameters < 1 || n_obs < 1)
    throw std::invalid_argument("info_criteria: need p >= 1 and n >= 1");
  InfoCriteria c;
  c.deviance = -2.0 * loglik;
  c.aic = c.deviance + 2.0 * n_parameters;
  c.bic = c.deviance + n_parameters * std::log(static_cast<double>(n_obs));
  return c;
}

// ----------------------------------------------------------------------
// spec-level entry points

namespace {

void require_not_random(const ModelSpec& spec, const char* who) {
  if (spec.cp_mode.kind == ChangepointKind::Random)
    throw std::invalid_argument(std::string(who) +
                                ": random-changepoint models go through the "
                                "segfit linearization driver");
}

}  // namespace

double joint_negloglik(const ParamPack& params, const Eigen::VectorXd& u,
                       const Dataset& data, int cluster_index,
                       const ModelSpec& spec) {
  require_not_random(spec, "joint_negloglik");
  if (spec.zeta_mode == ZetaMode::SharedMonth)
    throw std::invalid_argument(
        "joint_negloglik: shared-month models form one joint block; use "
        "joint_negloglik_shared");
  const LaplaceEngine eng(assemble_problem(data, spec));
  return eng.joint_negloglik(pack_params(params, spec), cluster_index, u);
}

double joint_negloglik_shared(const ParamPack& params, const Eigen::VectorXd& u,
                              const Dataset& data, const ModelSpec& spec) {
  require_not_random(spec, "joint_negloglik_shared");
  const LaplaceEngine eng(assemble_problem(data, spec));
  return eng.joint_negloglik(pack_params(params, spec), 0, u);
}

InnerResult inner_mode(const ParamPack& params, const Dataset& data,
                       int cluster_index, const ModelSpec& spec,
                       const InnerOptions& opts) {
  require_not_random(spec, "inner_mode");
  const LaplaceEngine eng(assemble_problem(data, spec));
  InnerOptions o = opts;
  o.want_dense_hessian = true;
  return eng.inner_mode(pack_params(params, spec), cluster_index, o);
}

double laplace_logmarg(const ParamPack& params, const Dataset& data,
                       const ModelSpec& spec, bool parallel) {
  require_not_random(spec, "laplace_logmarg");
  const LaplaceEngine eng(assemble_problem(data, spec));
  const LogmargValue lm =
      eng.logmarg(pack_params(params, spec), InnerOptions{}, nullptr, parallel);
  if (!lm.ok)
    throw EvaluationError("laplace_logmarg: inner solve failed",
                          lm.failed_block);
  return lm.value;
}

RawFit outer_fit(const Dataset& data, const ModelSpec& spec,
                 const ParamPack& init, const OuterOptions& opts) {
  require_not_random(spec, "outer_fit");
  const LaplaceEngine eng(assemble_problem(data, spec));
  return eng.fit(pack_params(init, spec), opts);
}

}  // namespace segzip
