#include "spock/projections.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "spock/parallel.hpp"

namespace spock {

void proj_soc_inplace(Eigen::Ref<Eigen::VectorXd> v) {
  const int d = static_cast<int>(v.size());
  if (d < 2) throw std::invalid_argument("proj_soc: dimension must be >= 2");
  const double t = v[d - 1];
  const double hn = v.head(d - 1).norm();
  if (hn <= t) return;        // inside the cone
  if (hn <= -t) {             // inside the polar cone
    v.setZero();
    return;
  }
  const double f = (hn + t) / (2.0 * hn);
  v.head(d - 1) *= f;
  v[d - 1] = 0.5 * (hn + t);
}

Eigen::VectorXd proj_soc(const Eigen::VectorXd& v) {
  Eigen::VectorXd r = v;
  proj_soc_inplace(r);
  return r;
}

Eigen::VectorXd proj_translated_soc(const Eigen::VectorXd& v, const Eigen::VectorXd& a) {
  if (v.size() != a.size()) throw std::invalid_argument("proj_translated_soc: dimension mismatch");
  Eigen::VectorXd r = v - a;
  proj_soc_inplace(r);
  return r + a;
}

void proj_cone_inplace(const ConeDesc& cone, Eigen::Ref<Eigen::VectorXd> v) {
  int off = 0;
  for (const auto& part : cone.parts) {
    switch (part.kind) {
      case ConeKind::Zero:
        v.segment(off, part.dim).setZero();
        break;
      case ConeKind::Free:
        break;
      case ConeKind::NonnegOrthant:
        v.segment(off, part.dim) = v.segment(off, part.dim).cwiseMax(0.0);
        break;
      case ConeKind::Soc:
        proj_soc_inplace(v.segment(off, part.dim));
        break;
    }
    off += part.dim;
  }
}

SolverCache make_solver_cache(const Raocp& p) {
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  const int N = tr.horizon();

  SolverCache c;
  c.P.resize(nn);
  c.K.resize(nnl);
  c.Rt_llt.resize(nnl);
  c.Abar.resize(nn - 1);
  c.s2_proj.resize(nnl);
  c.q_scr.assign(nn, Eigen::VectorXd::Zero(p.nx));
  c.d_scr.assign(nnl, Eigen::VectorXd::Zero(p.nu));
  c.term_u.assign(nn - 1, Eigen::VectorXd::Zero(p.nu));
  c.term_x.assign(nn - 1, Eigen::VectorXd::Zero(p.nx));
  c.adj_xu.assign(nn - 1, Eigen::VectorXd::Zero(p.nx + p.nu));

  // dynamics factorization, backward over stages
  const uint64_t dyn_flops = 2ull * p.nx * p.nx * (p.nx + p.nu);
  stage_parallel_for(tr, N, [&](int j) { c.P[j] = Eigen::MatrixXd::Identity(p.nx, p.nx); });

  std::vector<Eigen::MatrixXd> rt_term(nn - 1), k_term(nn - 1), p_term(nn - 1);
  for (int t = N - 1; t >= 0; --t) {
    stage_parallel_for(tr, t + 1, [&](int ip) {
      const Eigen::MatrixXd pb = c.P[ip] * p.B[ip - 1];  // P^{i+} B^{i+}
      rt_term[ip - 1] = p.B[ip - 1].transpose() * pb;
      k_term[ip - 1] = p.B[ip - 1].transpose() * (c.P[ip] * p.A[ip - 1]);
    }, 2 * dyn_flops);
    stage_parallel_for(tr, t, [&](int i) {
      Eigen::MatrixXd rt = Eigen::MatrixXd::Identity(p.nu, p.nu);
      Eigen::MatrixXd kt = Eigen::MatrixXd::Zero(p.nu, p.nx);
      for (int k = 0; k < tr.num_children(i); ++k) {
        const int ip = tr.child_first(i) + k;
        rt += rt_term[ip - 1];
        kt += k_term[ip - 1];
      }
      c.Rt_llt[i].compute(rt);
      if (c.Rt_llt[i].info() != Eigen::Success)
        throw std::runtime_error("make_solver_cache: Cholesky failed (corrupt dynamics data)");
      c.K[i] = -c.Rt_llt[i].solve(kt);
    }, dyn_flops);
    stage_parallel_for(tr, t + 1, [&](int ip) {
      const int i = tr.ancestor_of(ip);
      c.Abar[ip - 1] = p.A[ip - 1] + p.B[ip - 1] * c.K[i];
      p_term[ip - 1] = c.Abar[ip - 1].transpose() * c.P[ip] * c.Abar[ip - 1];
    }, 2 * dyn_flops);
    stage_parallel_for(tr, t, [&](int i) {
      Eigen::MatrixXd pi =
          Eigen::MatrixXd::Identity(p.nx, p.nx) + c.K[i].transpose() * c.K[i];
      for (int k = 0; k < tr.num_children(i); ++k) pi += p_term[tr.child_first(i) + k - 1];
      c.P[i] = pi;
    }, dyn_flops);
  }

  // kernel projectors for the risk-dual equalities
  global_pool().parallel_for(0, nnl, [&](int i) {
    const RiskSpec& rs = p.risk[i];
    const int nch = tr.num_children(i);
    const int ny = rs.rows();
    const int nnu = static_cast<int>(rs.F.cols());
    const int dim = ny + 2 * nch;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nch + nnu, dim);
    M.topLeftCorner(nch, ny) = rs.E.transpose();
    M.block(0, ny, nch, nch) = -Eigen::MatrixXd::Identity(nch, nch);
    M.block(0, ny + nch, nch, nch) = -Eigen::MatrixXd::Identity(nch, nch);
    if (nnu > 0) M.bottomLeftCorner(nnu, ny) = rs.F.transpose();

    // projector onto ker M = I - V1 V1' with V1 the right singular vectors
    // of the numerically nonzero singular values
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double thresh = 1e-12 * (sv.size() > 0 ? sv(0) : 0.0);
    int rank = 0;
    for (int k = 0; k < sv.size(); ++k)
      if (sv(k) > thresh) ++rank;
    const Eigen::MatrixXd V1 = svd.matrixV().leftCols(rank);
    c.s2_proj[i] = Eigen::MatrixXd::Identity(dim, dim) - V1 * V1.transpose();
  }, 100000);

  return c;
}

void proj_s1(const Raocp& p, SolverCache& cache, const PrimalLayout& zl,
             const Eigen::VectorXd& x_init, Eigen::Ref<Eigen::VectorXd> z) {
  const auto& tr = *p.tree;
  const int N = tr.horizon();
  const uint64_t mv = 2ull * zl.nx * (zl.nx + zl.nu);

  stage_parallel_for(tr, N, [&](int j) { cache.q_scr[j] = -z.segment(zl.x(j), zl.nx); }, zl.nx);

  for (int t = N - 1; t >= 0; --t) {
    stage_parallel_for(tr, t + 1, [&](int ip) {
      cache.term_u[ip - 1].noalias() =
          p.B[ip - 1].transpose() * (cache.q_scr[ip] + cache.P[ip] * p.c[ip - 1]);
    }, mv);
    stage_parallel_for(tr, t, [&](int i) {
      Eigen::VectorXd dbar = Eigen::VectorXd::Zero(zl.nu);
      for (int k = 0; k < tr.num_children(i); ++k)
        dbar += cache.term_u[tr.child_first(i) + k - 1];
      cache.d_scr[i] = cache.Rt_llt[i].solve(z.segment(zl.u(i), zl.nu) - dbar);
    }, mv);
    stage_parallel_for(tr, t + 1, [&](int ip) {
      const int i = tr.ancestor_of(ip);
      cache.term_x[ip - 1].noalias() =
          cache.Abar[ip - 1].transpose() *
          (cache.P[ip] * (p.B[ip - 1] * cache.d_scr[i] + p.c[ip - 1]) + cache.q_scr[ip]);
    }, 2 * mv);
    stage_parallel_for(tr, t, [&](int i) {
      Eigen::VectorXd qi =
          cache.K[i].transpose() * (cache.d_scr[i] - z.segment(zl.u(i), zl.nu)) -
          z.segment(zl.x(i), zl.nx);
      for (int k = 0; k < tr.num_children(i); ++k) qi += cache.term_x[tr.child_first(i) + k - 1];
      cache.q_scr[i] = qi;
    }, mv);
  }

  z.segment(zl.x(0), zl.nx) = x_init;
  for (int t = 0; t < N; ++t) {
    stage_parallel_for(tr, t, [&](int i) {
      z.segment(zl.u(i), zl.nu) = cache.K[i] * z.segment(zl.x(i), zl.nx) + cache.d_scr[i];
    }, mv);
    stage_parallel_for(tr, t + 1, [&](int ip) {
      const int i = tr.ancestor_of(ip);
      z.segment(zl.x(ip), zl.nx) = p.A[ip - 1] * z.segment(zl.x(i), zl.nx) +
                                   p.B[ip - 1] * z.segment(zl.u(i), zl.nu) + p.c[ip - 1];
    }, mv);
  }
}

void proj_s2(const Raocp& p, const SolverCache& cache, const PrimalLayout& zl,
             Eigen::Ref<Eigen::VectorXd> z) {
  const auto& tr = *p.tree;
  uint64_t s2_flops = 0;
  for (int i = 0; i < tr.num_nonleaf(); ++i) {
    const uint64_t d = static_cast<uint64_t>(zl.ydim(i)) + 2 * tr.num_children(i);
    s2_flops = std::max(s2_flops, 2 * d * d);
  }
  global_pool().parallel_for(0, tr.num_nonleaf(), [&](int i) {
    const int nch = tr.num_children(i);
    const int ny = zl.ydim(i);
    const int cf = tr.child_first(i);
    Eigen::VectorXd w(ny + 2 * nch);
    w.head(ny) = z.segment(zl.y(i), ny);
    w.segment(ny, nch) = z.segment(zl.tau(cf), nch);
    w.segment(ny + nch, nch) = z.segment(zl.s(cf), nch);
    w = cache.s2_proj[i] * w;
    z.segment(zl.y(i), ny) = w.head(ny);
    z.segment(zl.tau(cf), nch) = w.segment(ny, nch);
    z.segment(zl.s(cf), nch) = w.segment(ny + nch, nch);
  }, s2_flops);
}

void proj_s3(const Raocp& p, const SocEpigraphData& soc, const DualLayout& el,
             const std::vector<ConeDesc>& dual_cones, Eigen::Ref<Eigen::VectorXd> eta) {
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  const uint64_t seg_flops = 8ull * (p.nx + p.nu);
  global_pool().parallel_for(0, nn, [&](int i) {
    if (i < nnl) {
      proj_cone_inplace(dual_cones[i], eta.segment(el.y_copy(i), el.seg1_ydim[i]));
      double& sc = eta[el.risk_scalar(i)];
      sc = std::max(0.0, sc);
      eta.segment(el.cstr(i), el.seg1_nc[i]) =
          p.C[i].project(eta.segment(el.cstr(i), el.seg1_nc[i]));
    }
    if (i > 0) {
      const auto& d = soc.stage[i - 1];
      auto seg = eta.segment(el.stage_soc(i), el.stage_soc_dim(i));
      seg -= d.a;
      proj_soc_inplace(seg);
      seg += d.a;
    }
    if (i >= nnl) {
      const int j = i - nnl;
      eta.segment(el.leaf_cstr(j), el.seg3_nc[j]) =
          p.CN[j].project(eta.segment(el.leaf_cstr(j), el.seg3_nc[j]));
      const auto& d = soc.leaf[j];
      auto seg = eta.segment(el.leaf_soc(j), el.leaf_soc_dim(j));
      seg -= d.a;
      proj_soc_inplace(seg);
      seg += d.a;
    }
  }, seg_flops);
}

}  // namespace spock
