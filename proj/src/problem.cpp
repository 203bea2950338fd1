#include "spock/problem.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace spock {

namespace {
constexpr double kRankTolRel = 1e-10;

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

Eigen::MatrixXd check_symmetric(const Eigen::MatrixXd& M, const char* what) {
  require(M.rows() == M.cols(), "matrix must be square");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument(std::string(what) + ": matrix must be symmetric");
  return 0.5 * (M + M.transpose());
}
}  // namespace

void Box::validate() const {
  require(lo.size() == hi.size(), "Box: bound length mismatch");
  require((lo.array() <= hi.array()).all(), "Box: lower bound above upper bound");
}

Eigen::VectorXd Box::project(const Eigen::VectorXd& v) const {
  return v.cwiseMax(lo).cwiseMin(hi);
}

double Box::max_violation(const Eigen::VectorXd& v) const {
  if (v.size() == 0) return 0.0;
  return std::max(0.0, std::max((lo - v).maxCoeff(), (v - hi).maxCoeff()));
}

void Raocp::validate() const {
  require(tree != nullptr, "Raocp: missing tree");
  require(nx > 0 && nu > 0, "Raocp: dimensions must be positive");
  const int nn = tree->num_nodes();
  const int nnl = tree->num_nonleaf();
  const int nl = tree->num_leaves();
  require(static_cast<int>(A.size()) == nn - 1 && static_cast<int>(B.size()) == nn - 1 &&
              static_cast<int>(c.size()) == nn - 1,
          "Raocp: dynamics arrays must cover all non-root nodes");
  require(static_cast<int>(Q.size()) == nn - 1 && static_cast<int>(R.size()) == nn - 1 &&
              static_cast<int>(q.size()) == nn - 1 && static_cast<int>(r.size()) == nn - 1,
          "Raocp: stage cost arrays must cover all non-root nodes");
  require(static_cast<int>(QN.size()) == nl && static_cast<int>(qN.size()) == nl,
          "Raocp: terminal cost arrays must cover all leaves");
  require(static_cast<int>(Gx.size()) == nnl && static_cast<int>(Gu.size()) == nnl &&
              static_cast<int>(C.size()) == nnl && static_cast<int>(risk.size()) == nnl,
          "Raocp: constraint/risk arrays must cover all non-leaf nodes");
  require(static_cast<int>(GN.size()) == nl && static_cast<int>(CN.size()) == nl,
          "Raocp: terminal constraint arrays must cover all leaves");
  require(x_init.size() == nx, "Raocp: x_init has wrong length");

  for (int i = 1; i < nn; ++i) {
    require(A[i - 1].rows() == nx && A[i - 1].cols() == nx, "Raocp: A dimension mismatch");
    require(B[i - 1].rows() == nx && B[i - 1].cols() == nu, "Raocp: B dimension mismatch");
    require(c[i - 1].size() == nx, "Raocp: c dimension mismatch");
    require(Q[i - 1].rows() == nx && Q[i - 1].cols() == nx, "Raocp: Q dimension mismatch");
    require(R[i - 1].rows() == nu && R[i - 1].cols() == nu, "Raocp: R dimension mismatch");
    require(q[i - 1].size() == nx && r[i - 1].size() == nu, "Raocp: q/r dimension mismatch");
    check_symmetric(Q[i - 1], "Raocp Q");
    // R must be PD: factorization is the check
    Eigen::LLT<Eigen::MatrixXd> llt(check_symmetric(R[i - 1], "Raocp R"));
    require(llt.info() == Eigen::Success, "Raocp: R must be positive definite");
  }
  for (int i = 0; i < nnl; ++i) {
    risk[i].validate();
    require(risk[i].n == tree->num_children(i), "Raocp: risk spec size must match child count");
    C[i].validate();
    require(Gx[i].rows() == C[i].dim() && Gx[i].cols() == nx, "Raocp: Gx dimension mismatch");
    require(Gu[i].rows() == C[i].dim() && Gu[i].cols() == nu, "Raocp: Gu dimension mismatch");
  }
  for (int j = 0; j < nl; ++j) {
    require(QN[j].rows() == nx && QN[j].cols() == nx, "Raocp: QN dimension mismatch");
    require(qN[j].size() == nx, "Raocp: qN dimension mismatch");
    check_symmetric(QN[j], "Raocp QN");
    CN[j].validate();
    require(GN[j].rows() == CN[j].dim() && GN[j].cols() == nx, "Raocp: GN dimension mismatch");
  }
}

double Raocp::stage_cost(int node, const Eigen::VectorXd& x_anc,
                         const Eigen::VectorXd& u_anc) const {
  const int k = node - 1;
  return x_anc.dot(Q[k] * x_anc) + u_anc.dot(R[k] * u_anc) + q[k].dot(x_anc) + r[k].dot(u_anc);
}

double Raocp::terminal_cost(int leaf, const Eigen::VectorXd& x) const {
  const int k = leaf - tree->num_nonleaf();
  return x.dot(QN[k] * x) + qN[k].dot(x);
}

Eigen::VectorXd SocQuadLin::G(const Eigen::VectorXd& z, double tau) const {
  Eigen::VectorXd g(p + 2);
  if (p > 0) g.head(p) = head_map * z;
  const double row = 0.5 * tau - 0.5 * q_kernel.dot(z);
  g[p] = row;
  g[p + 1] = row;
  return g;
}

bool SocQuadLin::epigraph_member(const Eigen::VectorXd& z, double tau, double tol) const {
  const Eigen::VectorXd v = G(z, tau) - a;
  return v.head(p + 1).norm() <= v[p + 1] + tol;
}

SocQuadLin soc_data_quadlin(const Eigen::MatrixXd& Q_in, const Eigen::VectorXd& q) {
  const Eigen::MatrixXd Q = check_symmetric(Q_in, "soc_data_quadlin");
  const int n = static_cast<int>(Q.rows());
  require(q.size() == n, "soc_data_quadlin: q dimension mismatch");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  require(es.info() == Eigen::Success, "soc_data_quadlin: eigendecomposition failed");
  const Eigen::VectorXd evals = es.eigenvalues();
  const double lmax = std::max(0.0, evals.size() > 0 ? evals.maxCoeff() : 0.0);
  require(evals.minCoeff() >= -kRankTolRel * std::max(lmax, 1.0),
          "soc_data_quadlin: Q must be positive semidefinite");
  const double thresh = kRankTolRel * lmax;

  SocQuadLin d;
  d.n = n;
  d.lambda_max = lmax;
  std::vector<int> keep;
  for (int k = 0; k < n; ++k)
    if (evals[k] > thresh) keep.push_back(k);
  d.p = static_cast<int>(keep.size());

  d.S.resize(n, d.p);
  for (int k = 0; k < d.p; ++k) d.S.col(k) = es.eigenvectors().col(keep[k]);
  d.a.resize(d.p + 2);
  double qnorm2 = 0.0;  // ||S'q||^2 in the Qtilde^{-1} metric
  if (d.p > 0) {
    d.sqrt_factor = d.S.transpose() * Q * d.S;
    {
      // sqrt of the reduced PD block via its own eigendecomposition
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(d.sqrt_factor);
      d.sqrt_factor = er.eigenvectors() *
                      er.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                      er.eigenvectors().transpose();
    }
    d.head_map = d.sqrt_factor * d.S.transpose();
    d.q_kernel = q - d.S * (d.S.transpose() * q);
    const Eigen::VectorXd Sq = d.S.transpose() * q;
    const Eigen::VectorXd w = d.sqrt_factor.ldlt().solve(Sq);  // Qtilde^{-1/2} S'q
    d.a.head(d.p) = -0.5 * w;
    qnorm2 = w.squaredNorm();
  } else {
    d.sqrt_factor.resize(0, 0);
    d.head_map.resize(0, n);
    d.q_kernel = q;
  }
  d.a[d.p] = -0.125 * qnorm2 + 0.5;
  d.a[d.p + 1] = -0.125 * qnorm2 - 0.5;
  return d;
}

std::optional<SocL1::Certificate> SocL1::certificate(const Eigen::VectorXd& z, double tau) const {
  // the SOC condition is monotone in tau - lambda0*theta, so the minimal
  // theta = ||z||_1 decides feasibility
  Certificate c;
  c.lambda = z.cwiseAbs();
  c.theta = c.lambda.sum();
  if (base.epigraph_member(z, tau - lambda0 * c.theta)) return c;
  return std::nullopt;
}

bool SocL1::epigraph_member(const Eigen::VectorXd& z, double tau) const {
  return certificate(z, tau).has_value();
}

SocL1 soc_data_l1(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q, double lambda0) {
  require(lambda0 > 0.0, "soc_data_l1: lambda0 must be positive");
  Eigen::LLT<Eigen::MatrixXd> llt(check_symmetric(Q, "soc_data_l1"));
  require(llt.info() == Eigen::Success, "soc_data_l1: Q must be positive definite");
  SocL1 d;
  d.base = soc_data_quadlin(Q, q);
  d.lambda0 = lambda0;
  return d;
}

std::optional<SocSoft::Certificate> SocSoft::certificate(const Eigen::VectorXd& z,
                                                         double tau) const {
  Certificate c;
  c.theta = (z - z_max).cwiseMax(0.0);
  Eigen::VectorXd zt(z.size() + c.theta.size());
  zt << z, c.theta;
  if (lifted.epigraph_member(zt, tau)) return c;
  return std::nullopt;
}

bool SocSoft::epigraph_member(const Eigen::VectorXd& z, double tau) const {
  return certificate(z, tau).has_value();
}

SocSoft soc_data_soft(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& z_max) {
  const int n = static_cast<int>(Q.rows());
  require(q.size() == n && z_max.size() == n, "soc_data_soft: dimension mismatch");
  Eigen::MatrixXd Qlift = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Qlift.topLeftCorner(n, n) = Q;
  Qlift.bottomRightCorner(n, n).setIdentity();
  Eigen::VectorXd qlift = Eigen::VectorXd::Zero(2 * n);
  qlift.head(n) = q;
  SocSoft d;
  d.lifted = soc_data_quadlin(Qlift, qlift);
  d.z_max = z_max;
  return d;
}

SocEpigraphData soc_epigraph_data(const Raocp& p) {
  const int nn = p.tree->num_nodes();
  const int nnl = p.tree->num_nonleaf();
  SocEpigraphData d;
  d.stage.reserve(nn - 1);
  for (int i = 1; i < nn; ++i) {
    const int k = i - 1;
    Eigen::MatrixXd Qf = Eigen::MatrixXd::Zero(p.nx + p.nu, p.nx + p.nu);
    Qf.topLeftCorner(p.nx, p.nx) = p.Q[k];
    Qf.bottomRightCorner(p.nu, p.nu) = p.R[k];
    Eigen::VectorXd qf(p.nx + p.nu);
    qf << p.q[k], p.r[k];
    d.stage.push_back(soc_data_quadlin(Qf, qf));
  }
  d.leaf.reserve(p.tree->num_leaves());
  for (int j = nnl; j < nn; ++j) {
    const int k = j - nnl;
    d.leaf.push_back(soc_data_quadlin(p.QN[k], p.qN[k]));
  }
  return d;
}

Precond identity_precond(const Raocp& p) {
  Precond pc;
  pc.sx = Eigen::VectorXd::Ones(p.nx);
  pc.su = Eigen::VectorXd::Ones(p.nu);
  pc.sxN = Eigen::VectorXd::Ones(p.nx);
  pc.cstr_scale.assign(p.tree->num_nonleaf(), 1.0);
  pc.c_hat = 1.0;
  pc.is_identity = true;
  return pc;
}

std::pair<Raocp, Precond> precondition(const Raocp& p) {
  const auto& tr = *p.tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();

  int max_ch = 1;
  for (int i = 0; i < nnl; ++i) max_ch = std::max(max_ch, tr.num_children(i));

  Precond pc;
  pc.c_hat = std::sqrt(static_cast<double>(max_ch));
  pc.sx = Eigen::VectorXd::Ones(p.nx);
  pc.su = Eigen::VectorXd::Ones(p.nu);
  pc.sxN = Eigen::VectorXd::Ones(p.nx);
  for (int i = 1; i < nn; ++i) {
    for (int k = 0; k < p.nx; ++k)
      pc.sx[k] = std::max(pc.sx[k], std::sqrt(std::max(0.0, p.Q[i - 1](k, k))));
    for (int k = 0; k < p.nu; ++k)
      pc.su[k] = std::max(pc.su[k], std::sqrt(std::max(0.0, p.R[i - 1](k, k))));
  }
  pc.sx *= pc.c_hat;
  pc.su *= pc.c_hat;
  for (int j = 0; j < tr.num_leaves(); ++j)
    for (int k = 0; k < p.nx; ++k)
      pc.sxN[k] = std::max(pc.sxN[k], std::sqrt(std::max(0.0, p.QN[j](k, k))));

  const Eigen::VectorXd isx = pc.sx.cwiseInverse();
  const Eigen::VectorXd isu = pc.su.cwiseInverse();
  const Eigen::VectorXd isxN = pc.sxN.cwiseInverse();

  Raocp s = p;
  // child-side state scale: S_x for non-leaf children, S_xN for leaves
  auto child_scale = [&](int node) -> const Eigen::VectorXd& {
    return tr.is_leaf(node) ? pc.sxN : pc.sx;
  };
  auto child_iscale = [&](int node) -> const Eigen::VectorXd& {
    return tr.is_leaf(node) ? isxN : isx;
  };

  for (int i = 1; i < nn; ++i) {
    const int k = i - 1;
    // x~^i = S_i x^i with S depending on whether i is a leaf; ancestors are
    // never leaves, so the right factor is always S_x^{-1}
    s.A[k] = child_scale(i).asDiagonal() * p.A[k] * isx.asDiagonal();
    s.B[k] = child_scale(i).asDiagonal() * p.B[k] * isu.asDiagonal();
    s.c[k] = child_scale(i).cwiseProduct(p.c[k]);
    // stage costs weight the (non-leaf) ancestor state and input
    s.Q[k] = isx.asDiagonal() * p.Q[k] * isx.asDiagonal();
    s.R[k] = isu.asDiagonal() * p.R[k] * isu.asDiagonal();
    s.q[k] = isx.cwiseProduct(p.q[k]);
    s.r[k] = isu.cwiseProduct(p.r[k]);
    (void)child_iscale;
  }
  for (int j = 0; j < tr.num_leaves(); ++j) {
    s.QN[j] = isxN.asDiagonal() * p.QN[j] * isxN.asDiagonal();
    s.qN[j] = isxN.cwiseProduct(p.qN[j]);
  }

  pc.cstr_scale.assign(nnl, 1.0);
  for (int i = 0; i < nnl; ++i) {
    Eigen::MatrixXd Gxs = p.Gx[i] * isx.asDiagonal();
    Eigen::MatrixXd Gus = p.Gu[i] * isu.asDiagonal();
    Eigen::MatrixXd stacked(Gxs.rows(), Gxs.cols() + Gus.cols());
    stacked << Gxs, Gus;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stacked.transpose() * stacked);
    const double nrm = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    const double a = std::max(1.0, nrm);
    pc.cstr_scale[i] = a;
    s.Gx[i] = Gxs / a;
    s.Gu[i] = Gus / a;
    s.C[i].lo = p.C[i].lo / a;
    s.C[i].hi = p.C[i].hi / a;
  }
  for (int j = 0; j < tr.num_leaves(); ++j) {
    s.GN[j] = p.GN[j] * isxN.asDiagonal();
  }
  s.x_init = pc.sx.cwiseProduct(p.x_init);
  return {std::move(s), std::move(pc)};
}

}  // namespace spock
