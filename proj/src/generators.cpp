#include "spock/generators.hpp"

#include <cmath>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "spock/special_functions.hpp"

namespace spock {

namespace {

int64_t tree_nodes_up_to(int nw, int nb, int t_max) {
  // nodes(t) has nw^min(t, nb) members
  int64_t total = 0, width = 1;
  for (int t = 0; t <= t_max; ++t) {
    if (t > 0 && t <= nb) width *= nw;
    total += width;
  }
  return total;
}

}  // namespace

Case1Dims sample_case1_dims(Philox& rng, bool desk_scale) {
  const int64_t nv_max = desk_scale ? 10'000 : 100'000;
  for (int attempt = 0; attempt < 1'000'000; ++attempt) {
    Case1Dims d;
    d.N = static_cast<int>(rng.uniform_int(5, 15));
    d.nb = static_cast<int>(rng.uniform_int(1, 3));
    d.nw = static_cast<int>(rng.uniform_int(2, 10));
    d.nu = static_cast<int>(rng.uniform_int(10, 300));
    d.nx = 2 * d.nu;
    d.nv = d.nx * tree_nodes_up_to(d.nw, d.nb, d.N) + d.nu * tree_nodes_up_to(d.nw, d.nb, d.N - 1);
    if (d.nv >= 1'000 && d.nv <= nv_max) return d;
  }
  throw std::runtime_error("sample_case1_dims: rejection sampling failed");
}

Raocp gen_case1(Philox& rng, const Case1Dims& dims) {
  const int nx = dims.nx, nu = dims.nu, nw = dims.nw;

  // base probabilities; tiny entries are resampled so that no node of the
  // stopped tree falls below the build-time probability floor
  Eigen::VectorXd pi;
  for (int attempt = 0;; ++attempt) {
    pi = rng.simplex(nw);
    if (pi.minCoeff() >= 1e-4) break;
    if (attempt > 1000) throw std::runtime_error("gen_case1: degenerate probability vector");
  }
  const double gamma = rng.uniform();

  Eigen::MatrixXd trans(nw, nw);
  for (int w = 0; w < nw; ++w) trans.row(w) = pi.transpose();  // iid events
  auto tree = std::make_shared<ScenarioTree>(
      ScenarioTree::from_markov(trans, pi, dims.N, dims.nb));

  const Eigen::MatrixXd B0 = rng.normal_matrix(nx, nu, 0.0, 1.0);
  std::vector<Eigen::MatrixXd> Aw(nw), Bw(nw), Qw(nw), Rw(nw);
  const Eigen::VectorXd q0 = rng.uniform_vector(nx, 0.0, 0.1);
  const Eigen::VectorXd r0 = rng.uniform_vector(nu, 0.0, 100.0);
  for (int w = 0; w < nw; ++w) {
    Aw[w] = Eigen::MatrixXd::Identity(nx, nx) + rng.normal_matrix(nx, nx, 0.0, 0.1);
    Bw[w] = B0 + rng.normal_matrix(nx, nu, 0.0, 0.1);
    const Eigen::MatrixXd Qb = Eigen::MatrixXd(q0.asDiagonal()) + rng.normal_matrix(nx, nx, 0.0, 0.1);
    Qw[w] = Qb * Qb.transpose();
    const Eigen::MatrixXd Rb = Eigen::MatrixXd(r0.asDiagonal()) + rng.normal_matrix(nu, nu, 0.0, 0.1);
    Rw[w] = Rb * Rb.transpose();
  }
  const Eigen::VectorXd xbar = rng.uniform_vector(nx, 1.0, 2.0);
  const Eigen::VectorXd ubar = rng.uniform_vector(nu, 0.0, 0.1);

  const auto& tr = *tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  const int nl = tr.num_leaves();

  Raocp p;
  p.tree = tree;
  p.nx = nx;
  p.nu = nu;
  p.A.resize(nn - 1);
  p.B.resize(nn - 1);
  p.c.assign(nn - 1, Eigen::VectorXd::Zero(nx));
  p.Q.resize(nn - 1);
  p.R.resize(nn - 1);
  p.q.assign(nn - 1, Eigen::VectorXd::Zero(nx));
  p.r.assign(nn - 1, Eigen::VectorXd::Zero(nu));
  for (int i = 1; i < nn; ++i) {
    const int w = tr.event_of(i);
    p.A[i - 1] = Aw[w];
    p.B[i - 1] = Bw[w];
    p.Q[i - 1] = Qw[w];
    p.R[i - 1] = Rw[w];
  }
  p.QN.assign(nl, Eigen::MatrixXd(q0.asDiagonal()));
  p.qN.assign(nl, Eigen::VectorXd::Zero(nx));

  Eigen::MatrixXd Gx(nx + nu, nx), Gu(nx + nu, nu);
  Gx << Eigen::MatrixXd::Identity(nx, nx), Eigen::MatrixXd::Zero(nu, nx);
  Gu << Eigen::MatrixXd::Zero(nx, nu), Eigen::MatrixXd::Identity(nu, nu);
  Eigen::VectorXd lo(nx + nu), hi(nx + nu);
  lo << -xbar, -ubar;
  hi << xbar, ubar;
  p.Gx.assign(nnl, Gx);
  p.Gu.assign(nnl, Gu);
  p.C.assign(nnl, Box{lo, hi});
  p.GN.assign(nl, Eigen::MatrixXd::Identity(nx, nx));
  p.CN.assign(nl, Box{-xbar, xbar});
  p.risk.reserve(nnl);
  for (int i = 0; i < nnl; ++i) p.risk.push_back(avar_spec(gamma, tr.child_probs(i)));

  p.x_init.resize(nx);
  for (int k = 0; k < nx; ++k) p.x_init[k] = rng.uniform(-0.5 * xbar[k], 0.5 * xbar[k]);
  return p;
}

Raocp gen_case1_instance(uint64_t seed, bool desk_scale) {
  Philox rng(seed);
  const Case1Dims dims = sample_case1_dims(rng, desk_scale);
  return gen_case1(rng, dims);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_delayed(const Eigen::MatrixXd& Ac,
                                                               const Eigen::MatrixXd& Bc, double T,
                                                               double sigma) {
  const int nx = static_cast<int>(Ac.rows());
  const int nu = static_cast<int>(Bc.cols());
  if (sigma < 0.0 || sigma > T) throw std::invalid_argument("discretize_delayed: sigma outside [0, T]");

  // exp([[Ac, I], [0, 0]] t) = [[e^{Ac t}, int_0^t e^{Ac s} ds], [0, I]]
  auto phi = [&](double t) {
    Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(2 * nx, 2 * nx);
    blk.topLeftCorner(nx, nx) = Ac * t;
    blk.topRightCorner(nx, nx) = Eigen::MatrixXd::Identity(nx, nx) * t;
    const Eigen::MatrixXd e = blk.exp();
    return std::make_pair(Eigen::MatrixXd(e.topLeftCorner(nx, nx)),
                          Eigen::MatrixXd(e.topRightCorner(nx, nx)));
  };
  const auto [eAT, intT] = phi(T);
  const auto [eA1, int0] = phi(T - sigma);  // int_0^{T-sigma}
  (void)eA1;
  const Eigen::MatrixXd int1 = intT - int0;  // int_{T-sigma}^{T}

  const int na = nx + nu;
  Eigen::MatrixXd Aaug = Eigen::MatrixXd::Zero(na, na);
  Aaug.topLeftCorner(nx, nx) = eAT;
  Aaug.topRightCorner(nx, nu) = int1 * Bc;  // previous input acts before the delay elapses
  Eigen::MatrixXd Baug = Eigen::MatrixXd::Zero(na, nu);
  Baug.topRows(nx) = int0 * Bc;
  Baug.bottomRows(nu).setIdentity();
  return {std::move(Aaug), std::move(Baug)};
}

Raocp gen_ncs(uint64_t seed, const NcsOptions& opt) {
  if (opt.theta <= 0.0) throw std::invalid_argument("gen_ncs: theta must be positive");
  if (opt.phi0 <= 0.0 || opt.phi0 >= 1.0) throw std::invalid_argument("gen_ncs: phi0 outside (0, 1)");
  if (opt.N < 2) throw std::invalid_argument("gen_ncs: horizon must be >= 2");
  if (opt.n < 1) throw std::invalid_argument("gen_ncs: scenario parameter must be >= 1");

  std::vector<int> branching(opt.N, 1);
  if (opt.shape == NcsOptions::Shape::HighInitial) {
    branching[0] = opt.n * opt.n;
  } else {
    branching[0] = opt.n;
    branching[1] = opt.n;
  }
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching(branching));
  const auto& tr = *tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  const int nl = tr.num_leaves();

  Philox rng(seed);
  Eigen::MatrixXd Ac = Eigen::MatrixXd::Identity(opt.nx, opt.nx);
  for (int k = 0; k < opt.nx; ++k) Ac(k, k) += rng.normal(0.0, 0.1);
  const Eigen::MatrixXd Bc = 0.1 * Eigen::MatrixXd::Ones(opt.nx, opt.nu);

  // delay-fraction process on the tree: children at Beta quantile midpoints
  std::vector<double> phi(nn);
  phi[0] = opt.phi0;
  for (int i = 0; i < nnl; ++i) {
    const int k0 = tr.child_first(i);
    const int nch = tr.num_children(i);
    for (int k = 0; k < nch; ++k) {
      const double iota = (2.0 * k + 1.0) / (2.0 * nch);
      phi[k0 + k] = beta_quantile(opt.theta * phi[i], opt.theta * (1.0 - phi[i]), iota);
    }
  }

  const int na = opt.nx + opt.nu;
  Raocp p;
  p.tree = tree;
  p.nx = na;
  p.nu = opt.nu;
  p.A.resize(nn - 1);
  p.B.resize(nn - 1);
  p.c.assign(nn - 1, Eigen::VectorXd::Zero(na));
  for (int i = 1; i < nn; ++i) {
    const double sigma = phi[i] * opt.T;
    auto [Aa, Ba] = discretize_delayed(Ac, Bc, opt.T, sigma);
    p.A[i - 1] = std::move(Aa);
    p.B[i - 1] = std::move(Ba);
  }

  Eigen::VectorXd qdiag = Eigen::VectorXd::Constant(na, 1e-6);
  p.Q.assign(nn - 1, Eigen::MatrixXd(qdiag.asDiagonal()));
  p.R.assign(nn - 1, Eigen::MatrixXd(0.1 * Eigen::MatrixXd::Identity(opt.nu, opt.nu)));
  p.q.assign(nn - 1, Eigen::VectorXd::Zero(na));
  p.r.assign(nn - 1, Eigen::VectorXd::Zero(opt.nu));
  Eigen::VectorXd qNdiag(na);
  qNdiag.head(opt.nx).setOnes();
  qNdiag.tail(opt.nu).setConstant(1e-6);
  p.QN.assign(nl, Eigen::MatrixXd(qNdiag.asDiagonal()));
  p.qN.assign(nl, Eigen::VectorXd::Zero(na));

  // state box: plant part within 3, held-input part within the input bound
  Eigen::VectorXd xhi(na);
  xhi.head(opt.nx).setConstant(3.0);
  xhi.tail(opt.nu).setConstant(0.9);
  Eigen::MatrixXd Gx(na + opt.nu, na), Gu(na + opt.nu, opt.nu);
  Gx << Eigen::MatrixXd::Identity(na, na), Eigen::MatrixXd::Zero(opt.nu, na);
  Gu << Eigen::MatrixXd::Zero(na, opt.nu), Eigen::MatrixXd::Identity(opt.nu, opt.nu);
  Eigen::VectorXd hi(na + opt.nu);
  hi << xhi, Eigen::VectorXd::Constant(opt.nu, 0.9);
  p.Gx.assign(nnl, Gx);
  p.Gu.assign(nnl, Gu);
  p.C.assign(nnl, Box{-hi, hi});
  p.GN.assign(nl, Eigen::MatrixXd::Identity(na, na));
  p.CN.assign(nl, Box{-xhi, xhi});

  p.risk.reserve(nnl);
  for (int i = 0; i < nnl; ++i) p.risk.push_back(avar_spec(opt.gamma, tr.child_probs(i)));

  p.x_init.resize(na);
  p.x_init.head(opt.nx).setConstant(2.0);
  p.x_init.tail(opt.nu).setZero();
  return p;
}

}  // namespace spock
