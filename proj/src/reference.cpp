#include "spock/reference.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "spock/tree_operator.hpp"

namespace spock {
namespace ref {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double sup_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

}  // namespace

RiccatiSolution riccati_tree_solve(const Raocp& p, const Eigen::VectorXd& x_init) {
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  for (int i = 0; i < nnl; ++i) {
    require(p.risk[i].kind == RiskSpec::Kind::Avar && p.risk[i].gamma == 1.0,
            "riccati_tree_solve: requires expectation risk (AV@R with gamma = 1)");
    require((p.risk[i].pi - tr.child_probs(i)).cwiseAbs().maxCoeff() < 1e-12,
            "riccati_tree_solve: risk base probabilities must match the tree");
  }

  RiccatiSolution sol;
  sol.W.resize(nn);
  sol.w.resize(nn);
  sol.w0.resize(nn);
  sol.Kfb.resize(nnl);
  sol.kff.resize(nnl);

  for (int j = nnl; j < nn; ++j) {
    sol.W[j] = p.QN[j - nnl];
    sol.w[j] = p.qN[j - nnl];
    sol.w0[j] = 0.0;
  }

  for (int i = nnl - 1; i >= 0; --i) {
    Eigen::MatrixXd Hxx = Eigen::MatrixXd::Zero(p.nx, p.nx);
    Eigen::MatrixXd Huu = Eigen::MatrixXd::Zero(p.nu, p.nu);
    Eigen::MatrixXd Hxu = Eigen::MatrixXd::Zero(p.nx, p.nu);
    Eigen::VectorXd hx = Eigen::VectorXd::Zero(p.nx);
    Eigen::VectorXd hu = Eigen::VectorXd::Zero(p.nu);
    double h0 = 0.0;
    for (int k = 0; k < tr.num_children(i); ++k) {
      const int ip = tr.child_first(i) + k;
      const double pr = tr.cond_prob(ip);
      const auto& A = p.A[ip - 1];
      const auto& B = p.B[ip - 1];
      const auto& c = p.c[ip - 1];
      const auto& W = sol.W[ip];
      const Eigen::VectorXd wc = 2.0 * W * c + sol.w[ip];
      Hxx += pr * (p.Q[ip - 1] + A.transpose() * W * A);
      Huu += pr * (p.R[ip - 1] + B.transpose() * W * B);
      Hxu += pr * (A.transpose() * W * B);
      hx += pr * (p.q[ip - 1] + A.transpose() * wc);
      hu += pr * (p.r[ip - 1] + B.transpose() * wc);
      h0 += pr * (c.dot(W * c) + sol.w[ip].dot(c) + sol.w0[ip]);
    }
    Eigen::LDLT<Eigen::MatrixXd> huu(Huu);
    sol.Kfb[i] = -huu.solve(Hxu.transpose());
    sol.kff[i] = -0.5 * huu.solve(hu);
    Eigen::MatrixXd Wi = Hxx - Hxu * huu.solve(Hxu.transpose());
    sol.W[i] = 0.5 * (Wi + Wi.transpose());
    sol.w[i] = hx - Hxu * huu.solve(hu);
    sol.w0[i] = h0 - 0.25 * hu.dot(huu.solve(hu));
  }

  sol.value = x_init.dot(sol.W[0] * x_init) + sol.w[0].dot(x_init) + sol.w0[0];
  return sol;
}

Trajectory simulate_policy(const Raocp& p, const std::vector<Eigen::MatrixXd>& Kfb,
                           const std::vector<Eigen::VectorXd>& kff,
                           const Eigen::VectorXd& x_init) {
  const auto& tr = *p.tree;
  Trajectory t;
  t.x.resize(tr.num_nodes());
  t.u.resize(tr.num_nonleaf());
  t.x[0] = x_init;
  for (int i = 0; i < tr.num_nonleaf(); ++i) {
    t.u[i] = Kfb[i] * t.x[i] + kff[i];
    for (int k = 0; k < tr.num_children(i); ++k) {
      const int ip = tr.child_first(i) + k;
      t.x[ip] = p.A[ip - 1] * t.x[i] + p.B[ip - 1] * t.u[i] + p.c[ip - 1];
    }
  }
  return t;
}

double nested_risk_value(const Raocp& p, const std::vector<Eigen::VectorXd>& u,
                         const Eigen::VectorXd& x_init) {
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  require(static_cast<int>(u.size()) == nnl, "nested_risk_value: need one input per non-leaf");

  std::vector<Eigen::VectorXd> x(nn);
  x[0] = x_init;
  for (int i = 0; i < nnl; ++i)
    for (int k = 0; k < tr.num_children(i); ++k) {
      const int ip = tr.child_first(i) + k;
      x[ip] = p.A[ip - 1] * x[i] + p.B[ip - 1] * u[i] + p.c[ip - 1];
    }

  std::vector<double> val(nn, 0.0);
  for (int j = nnl; j < nn; ++j) val[j] = p.terminal_cost(j, x[j]);
  for (int i = nnl - 1; i >= 0; --i) {
    Eigen::VectorXd Z(tr.num_children(i));
    for (int k = 0; k < tr.num_children(i); ++k) {
      const int ip = tr.child_first(i) + k;
      Z[k] = p.stage_cost(ip, x[i], u[i]) + val[ip];
    }
    val[i] = eval_risk_primal(p.risk[i], Z);
  }
  return val[0];
}

double risk_dual_value(const RiskSpec& spec, const Eigen::VectorXd& Z) {
  spec.validate();
  require(Z.size() == spec.n, "risk_dual_value: Z has wrong length");
  const int ny = spec.rows();
  const int nnu = static_cast<int>(spec.F.cols());

  // equalities: E'y = Z, F'y = 0, and y = 0 on duals of free parts
  int extra_eq = 0, n_ineq = 0;
  for (const auto& part : spec.cone.parts) {
    if (part.kind == ConeKind::Free) extra_eq += part.dim;
    if (part.kind == ConeKind::NonnegOrthant) n_ineq += part.dim;
    if (part.kind == ConeKind::Soc)
      throw std::invalid_argument("risk_dual_value: SOC cones unsupported by the LP oracle");
  }
  Eigen::MatrixXd Aeq(spec.n + nnu + extra_eq, ny);
  Eigen::VectorXd beq(Aeq.rows());
  Aeq.topRows(spec.n) = spec.E.transpose();
  beq.head(spec.n) = Z;
  if (nnu > 0) {
    Aeq.middleRows(spec.n, nnu) = spec.F.transpose();
    beq.segment(spec.n, nnu).setZero();
  }
  Eigen::MatrixXd Ain = Eigen::MatrixXd::Zero(n_ineq, ny);
  Eigen::VectorXd bin = Eigen::VectorXd::Zero(n_ineq);
  int row = 0, er = spec.n + nnu, ir = 0;
  for (const auto& part : spec.cone.parts) {
    for (int k = 0; k < part.dim; ++k, ++row) {
      if (part.kind == ConeKind::Free) {
        Aeq.row(er).setZero();
        Aeq(er, row) = 1.0;
        beq[er++] = 0.0;
      } else if (part.kind == ConeKind::NonnegOrthant) {
        Ain(ir, row) = -1.0;  // y_row >= 0
        bin[ir++] = 0.0;
      }
      // Zero-cone rows dualize to free components: no constraint
    }
  }
  return -brute_force_lp_max(-spec.b, Aeq, beq, Ain, bin);
}

double FeasibilityReport::max_violation() const {
  double m = std::max(x0, dynamics);
  m = std::max(m, std::max(stage_box, leaf_box));
  m = std::max(m, std::max(risk_cone, risk_scalar));
  m = std::max(m, kernel);
  m = std::max(m, std::max(epigraph_stage, epigraph_leaf));
  m = std::max(m, std::max(soc_stage, soc_leaf));
  return m;
}

FeasibilityReport feasibility_report(const Raocp& p, const Eigen::VectorXd& z) {
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  const PrimalLayout zl = make_primal_layout(p);
  require(z.size() == zl.n, "feasibility_report: primal vector has wrong length");
  const SocEpigraphData soc = soc_epigraph_data(p);

  FeasibilityReport rep;
  rep.x0 = sup_norm(z.segment(zl.x(0), p.nx) - p.x_init);
  for (int i = 1; i < nn; ++i) {
    const int a = tr.ancestor_of(i);
    rep.dynamics = std::max(
        rep.dynamics, sup_norm(z.segment(zl.x(i), p.nx) - p.A[i - 1] * z.segment(zl.x(a), p.nx) -
                               p.B[i - 1] * z.segment(zl.u(a), p.nu) - p.c[i - 1]));
    const double tau = z[zl.tau(i)];
    const double ell = p.stage_cost(i, z.segment(zl.x(a), p.nx), z.segment(zl.u(a), p.nu));
    rep.epigraph_stage = std::max(rep.epigraph_stage, ell - tau);
    Eigen::VectorXd xu(p.nx + p.nu);
    xu << z.segment(zl.x(a), p.nx), z.segment(zl.u(a), p.nu);
    const auto& d = soc.stage[i - 1];
    const Eigen::VectorXd g = d.G(xu, tau) - d.a;
    rep.soc_stage = std::max(rep.soc_stage, g.head(d.p + 1).norm() - g[d.p + 1]);
  }
  for (int i = 0; i < nnl; ++i) {
    rep.stage_box = std::max(
        rep.stage_box,
        p.C[i].max_violation(p.Gx[i] * z.segment(zl.x(i), p.nx) + p.Gu[i] * z.segment(zl.u(i), p.nu)));
    const auto y = z.segment(zl.y(i), zl.ydim(i));
    // distance to the dual cone, componentwise over the parts
    const ConeDesc dk = dual_cone(p.risk[i].cone);
    int off = 0;
    for (const auto& part : dk.parts) {
      if (part.kind == ConeKind::NonnegOrthant) {
        rep.risk_cone = std::max(rep.risk_cone, std::max(0.0, -y.segment(off, part.dim).minCoeff()));
      } else if (part.kind == ConeKind::Zero) {
        rep.risk_cone = std::max(rep.risk_cone, sup_norm(y.segment(off, part.dim)));
      }
      off += part.dim;
    }
    rep.risk_scalar = std::max(rep.risk_scalar, p.risk[i].b.dot(y) - z[zl.s(i)]);
    const int nch = tr.num_children(i);
    const int cf = tr.child_first(i);
    Eigen::VectorXd resid = p.risk[i].E.transpose() * y;
    for (int k = 0; k < nch; ++k) resid[k] -= z[zl.tau(cf + k)] + z[zl.s(cf + k)];
    rep.kernel = std::max(rep.kernel, sup_norm(resid));
    if (p.risk[i].F.cols() > 0)
      rep.kernel = std::max(rep.kernel, sup_norm(p.risk[i].F.transpose() * y));
  }
  for (int j = nnl; j < nn; ++j) {
    const int k = j - nnl;
    const auto x = z.segment(zl.x(j), p.nx);
    rep.leaf_box = std::max(rep.leaf_box, p.CN[k].max_violation(p.GN[k] * x));
    const double s = z[zl.s(j)];
    rep.epigraph_leaf = std::max(rep.epigraph_leaf, p.terminal_cost(j, x) - s);
    const auto& d = soc.leaf[k];
    const Eigen::VectorXd g = d.G(x, s) - d.a;
    rep.soc_leaf = std::max(rep.soc_leaf, g.head(d.p + 1).norm() - g[d.p + 1]);
  }
  rep.epigraph_stage = std::max(0.0, rep.epigraph_stage);
  rep.epigraph_leaf = std::max(0.0, rep.epigraph_leaf);
  rep.soc_stage = std::max(0.0, rep.soc_stage);
  rep.soc_leaf = std::max(0.0, rep.soc_leaf);
  rep.risk_scalar = std::max(0.0, rep.risk_scalar);
  return rep;
}

Eigen::MatrixXd materialize(int in_dim, int out_dim,
                            const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply) {
  Eigen::MatrixXd M(out_dim, in_dim);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(in_dim), col(out_dim);
  for (int k = 0; k < in_dim; ++k) {
    e[k] = 1.0;
    apply(e, col);
    M.col(k) = col;
    e[k] = 0.0;
  }
  return M;
}

Eigen::VectorXd proj_affine_kkt(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& v) {
  const int n = static_cast<int>(A.cols());
  const int m = static_cast<int>(A.rows());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n).setIdentity();
  kkt.topRightCorner(n, m) = A.transpose();
  kkt.bottomLeftCorner(m, n) = A;
  Eigen::VectorXd rhs(n + m);
  rhs << v, b;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(kkt);
  return cod.solve(rhs).head(n);
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> dense_dynamics_constraints(
    const Raocp& p, const Eigen::VectorXd& x_init) {
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  const int nz1 = nn * p.nx + nnl * p.nu;
  const int rows = nn * p.nx;
  auto xcol = [&](int node) { return node * p.nx; };
  auto ucol = [&](int node) { return nn * p.nx + node * p.nu; };

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(rows, nz1);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(rows);
  G.block(0, xcol(0), p.nx, p.nx).setIdentity();
  h.head(p.nx) = x_init;
  for (int i = 1; i < nn; ++i) {
    const int a = tr.ancestor_of(i);
    G.block(i * p.nx, xcol(i), p.nx, p.nx).setIdentity();
    G.block(i * p.nx, xcol(a), p.nx, p.nx) = -p.A[i - 1];
    G.block(i * p.nx, ucol(a), p.nx, p.nu) = -p.B[i - 1];
    h.segment(i * p.nx, p.nx) = p.c[i - 1];
  }
  return {std::move(G), std::move(h)};
}

namespace {

// local SOC projection (last coordinate is the axis)
Eigen::VectorXd soc_proj_local(const Eigen::VectorXd& v) {
  const int d = static_cast<int>(v.size());
  const double t = v[d - 1];
  const double hn = v.head(d - 1).norm();
  if (hn <= t) return v;
  Eigen::VectorXd r = Eigen::VectorXd::Zero(d);
  if (hn <= -t) return r;
  const double f = (hn + t) / (2.0 * hn);
  r.head(d - 1) = f * v.head(d - 1);
  r[d - 1] = 0.5 * (hn + t);
  return r;
}

// distance (sup norm) from w to the support face argmax_{v in SOC+a} eta'v
double soc_face_distance(const Eigen::VectorXd& w, const Eigen::VectorXd& eta,
                         const Eigen::VectorXd& a, double tolc, double& domain_viol) {
  const int d = static_cast<int>(w.size());
  const Eigen::VectorXd u = w - a;
  const double ph = eta.head(d - 1).norm();
  const double pt = eta[d - 1];
  domain_viol = std::max(domain_viol, ph + pt);  // need eta in the polar cone
  if (sup_norm(eta) <= tolc) return sup_norm(u - soc_proj_local(u));  // face = whole cone
  if (ph + pt < -tolc) return sup_norm(u);                            // face = apex
  // boundary ray through (-eta_head, ||eta_head||)
  Eigen::VectorXd dir(d);
  dir.head(d - 1) = -eta.head(d - 1);
  dir[d - 1] = ph;
  const double dn2 = dir.squaredNorm();
  const double s = dn2 > 0.0 ? std::max(0.0, u.dot(dir) / dn2) : 0.0;
  return sup_norm(u - s * dir);
}

}  // namespace

KktReport kkt_check(const Raocp& p, const SocEpigraphData& soc, double alpha,
                    const Eigen::VectorXd& z, const Eigen::VectorXd& eta,
                    const Eigen::VectorXd& tol1, const Eigen::VectorXd& tol2) {
  (void)alpha;
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  TreeOperator op(p, soc);
  const auto& zl = op.zlay();
  const auto& el = op.elay();
  require(z.size() == zl.n && eta.size() == el.n, "kkt_check: dimension mismatch");
  require(tol1.size() == zl.n && tol2.size() == el.n, "kkt_check: tolerance vectors mismatch");

  const Eigen::MatrixXd L = materialize(
      zl.n, el.n, [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) { op.apply(v, out); });
  const Eigen::VectorXd Lte = L.transpose() * eta;
  const Eigen::VectorXd Lz = L * z;
  const double tolc = 1e-8 * (1.0 + sup_norm(eta));

  KktReport rep;

  // primal inclusion: 0 in (1, N_S1(z1), N_S2(z2)) + L* eta
  rep.primal = std::fabs(1.0 + Lte[0]) / tol1[0];

  const int nz1 = nn * p.nx + nnl * p.nu;
  auto [G, h] = dense_dynamics_constraints(p, p.x_init);
  const Eigen::VectorXd z1 = z.segment(1, nz1);
  rep.membership = std::max(rep.membership, sup_norm(G * z1 - h));
  {
    const Eigen::VectorXd w = -Lte.segment(1, nz1);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(G.transpose());
    const Eigen::VectorXd lam = cod.solve(w);
    const Eigen::VectorXd resid = w - G.transpose() * lam;
    for (int k = 0; k < nz1; ++k)
      rep.primal = std::max(rep.primal, std::fabs(resid[k]) / tol1[1 + k]);
  }

  for (int i = 0; i < nnl; ++i) {
    const int ny = zl.ydim(i);
    const int nch = tr.num_children(i);
    const int cf = tr.child_first(i);
    const int dim = ny + 2 * nch;
    const int nnu = static_cast<int>(p.risk[i].F.cols());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nch + nnu, dim);
    M.topLeftCorner(nch, ny) = p.risk[i].E.transpose();
    M.block(0, ny, nch, nch) = -Eigen::MatrixXd::Identity(nch, nch);
    M.block(0, ny + nch, nch, nch) = -Eigen::MatrixXd::Identity(nch, nch);
    if (nnu > 0) M.bottomLeftCorner(nnu, ny) = p.risk[i].F.transpose();

    Eigen::VectorXd z2(dim), w2(dim), t2(dim);
    z2.head(ny) = z.segment(zl.y(i), ny);
    w2.head(ny) = -Lte.segment(zl.y(i), ny);
    t2.head(ny) = tol1.segment(zl.y(i), ny);
    for (int k = 0; k < nch; ++k) {
      z2[ny + k] = z[zl.tau(cf + k)];
      z2[ny + nch + k] = z[zl.s(cf + k)];
      w2[ny + k] = -Lte[zl.tau(cf + k)];
      w2[ny + nch + k] = -Lte[zl.s(cf + k)];
      t2[ny + k] = tol1[zl.tau(cf + k)];
      t2[ny + nch + k] = tol1[zl.s(cf + k)];
    }
    rep.membership = std::max(rep.membership, sup_norm(M * z2));
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(
        Eigen::MatrixXd(M.transpose()));
    const Eigen::VectorXd lam = cod.solve(w2);
    const Eigen::VectorXd resid = w2 - M.transpose() * lam;
    for (int k = 0; k < dim; ++k) rep.primal = std::max(rep.primal, std::fabs(resid[k]) / t2[k]);
  }

  // dual inclusion: Lz in_eps support face of S3 at eta, segment by segment
  for (int i = 0; i < nn; ++i) {
    if (i < nnl) {
      const ConeDesc dk = dual_cone(p.risk[i].cone);
      int off = el.y_copy(i);
      for (const auto& part : dk.parts) {
        for (int k = 0; k < part.dim; ++k) {
          const double e = eta[off + k], w = Lz[off + k], tl = tol2[off + k];
          double dist = 0.0;
          switch (part.kind) {
            case ConeKind::NonnegOrthant:
              rep.membership = std::max(rep.membership, e - tolc);
              dist = (e < -tolc) ? std::fabs(w) : std::max(0.0, -w);
              break;
            case ConeKind::Free:
              rep.membership = std::max(rep.membership, std::fabs(e) - tolc);
              break;
            case ConeKind::Zero:
              dist = std::fabs(w);
              break;
            case ConeKind::Soc:
              break;  // handled below for contiguous SOC parts
          }
          rep.dual = std::max(rep.dual, dist / tl);
        }
        if (part.kind == ConeKind::Soc) {
          double dv = 0.0;
          const double dist =
              soc_face_distance(Lz.segment(off, part.dim), eta.segment(off, part.dim),
                                Eigen::VectorXd::Zero(part.dim), tolc, dv);
          rep.membership = std::max(rep.membership, dv);
          rep.dual = std::max(rep.dual, dist / tol2.segment(off, part.dim).minCoeff());
        }
        off += part.dim;
      }
      {  // scalar row: set R_+
        const int idx = el.risk_scalar(i);
        const double e = eta[idx], w = Lz[idx];
        rep.membership = std::max(rep.membership, e - tolc);
        const double dist = (e < -tolc) ? std::fabs(w) : std::max(0.0, -w);
        rep.dual = std::max(rep.dual, dist / tol2[idx]);
      }
      for (int k = 0; k < el.seg1_nc[i]; ++k) {  // box rows
        const int idx = el.cstr(i) + k;
        const double e = eta[idx], w = Lz[idx];
        const double lo = p.C[i].lo[k], hi = p.C[i].hi[k];
        double dist;
        if (e > tolc)
          dist = std::fabs(w - hi);
        else if (e < -tolc)
          dist = std::fabs(w - lo);
        else
          dist = std::max(0.0, std::max(lo - w, w - hi));
        rep.dual = std::max(rep.dual, dist / tol2[idx]);
      }
    }
    if (i > 0) {
      const int off = el.stage_soc(i);
      const int d = el.stage_soc_dim(i);
      double dv = 0.0;
      const double dist = soc_face_distance(Lz.segment(off, d), eta.segment(off, d),
                                            soc.stage[i - 1].a, tolc, dv);
      rep.membership = std::max(rep.membership, dv);
      rep.dual = std::max(rep.dual, dist / tol2.segment(off, d).minCoeff());
    }
    if (i >= nnl) {
      const int j = i - nnl;
      for (int k = 0; k < el.seg3_nc[j]; ++k) {
        const int idx = el.leaf_cstr(j) + k;
        const double e = eta[idx], w = Lz[idx];
        const double lo = p.CN[j].lo[k], hi = p.CN[j].hi[k];
        double dist;
        if (e > tolc)
          dist = std::fabs(w - hi);
        else if (e < -tolc)
          dist = std::fabs(w - lo);
        else
          dist = std::max(0.0, std::max(lo - w, w - hi));
        rep.dual = std::max(rep.dual, dist / tol2[idx]);
      }
      const int off = el.leaf_soc(j);
      const int d = el.leaf_soc_dim(j);
      double dv = 0.0;
      const double dist = soc_face_distance(Lz.segment(off, d), eta.segment(off, d),
                                            soc.leaf[j].a, tolc, dv);
      rep.membership = std::max(rep.membership, dv);
      rep.dual = std::max(rep.dual, dist / tol2.segment(off, d).minCoeff());
    }
  }
  return rep;
}

}  // namespace ref
}  // namespace spock
