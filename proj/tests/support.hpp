#pragma once

#include <memory>
#include <vector>

#include "spock/problem.hpp"
#include "spock/rng.hpp"
#include "spock/tree.hpp"

namespace spock::testing {

struct TinyOpts {
  double gamma = 1.0;
  double box_halfwidth = 1e6;  // wide enough to stay inactive
  bool affine_c = true;
  bool linear_cost = true;
  double q_rank_deficient_prob = 0.0;
  // gamma = 1 defaults to the equality-form expectation spec; set to force
  // the standard AV@R stacking instead
  bool avar_form_at_one = false;
};

// Random well-posed problem on a given tree, for unit and acceptance tests.
inline Raocp make_tiny(std::shared_ptr<const ScenarioTree> tree, int nx, int nu, uint64_t seed,
                       const TinyOpts& o = {}) {
  Philox rng(seed);
  const auto& tr = *tree;
  const int nn = tr.num_nodes();
  const int nnl = tr.num_nonleaf();
  const int nl = tr.num_leaves();

  Raocp p;
  p.tree = std::move(tree);
  p.nx = nx;
  p.nu = nu;
  p.A.resize(nn - 1);
  p.B.resize(nn - 1);
  p.c.resize(nn - 1);
  p.Q.resize(nn - 1);
  p.R.resize(nn - 1);
  p.q.resize(nn - 1);
  p.r.resize(nn - 1);
  for (int i = 1; i < nn; ++i) {
    p.A[i - 1] = 0.8 * Eigen::MatrixXd::Identity(nx, nx) + rng.normal_matrix(nx, nx, 0.0, 0.1);
    p.B[i - 1] = rng.normal_matrix(nx, nu, 0.0, 0.5);
    p.c[i - 1] = o.affine_c ? Eigen::VectorXd(rng.normal_matrix(nx, 1, 0.0, 0.1))
                            : Eigen::VectorXd(Eigen::VectorXd::Zero(nx));
    Eigen::MatrixXd M = rng.normal_matrix(nx, nx, 0.0, 1.0);
    if (rng.uniform() < o.q_rank_deficient_prob && nx > 1) M.col(0).setZero();
    p.Q[i - 1] = M * M.transpose() / nx;
    Eigen::MatrixXd Mr = rng.normal_matrix(nu, nu, 0.0, 0.3);
    p.R[i - 1] = Eigen::MatrixXd::Identity(nu, nu) + Mr * Mr.transpose();
    p.q[i - 1] = o.linear_cost ? Eigen::VectorXd(rng.normal_matrix(nx, 1, 0.0, 0.1))
                               : Eigen::VectorXd(Eigen::VectorXd::Zero(nx));
    p.r[i - 1] = o.linear_cost ? Eigen::VectorXd(rng.normal_matrix(nu, 1, 0.0, 0.1))
                               : Eigen::VectorXd(Eigen::VectorXd::Zero(nu));
  }
  p.QN.resize(nl);
  p.qN.resize(nl);
  for (int j = 0; j < nl; ++j) {
    Eigen::MatrixXd M = rng.normal_matrix(nx, nx, 0.0, 1.0);
    p.QN[j] = M * M.transpose() / nx;
    p.qN[j] = o.linear_cost ? Eigen::VectorXd(rng.normal_matrix(nx, 1, 0.0, 0.1))
                            : Eigen::VectorXd(Eigen::VectorXd::Zero(nx));
  }

  Eigen::MatrixXd Gx(nx + nu, nx), Gu(nx + nu, nu);
  Gx << Eigen::MatrixXd::Identity(nx, nx), Eigen::MatrixXd::Zero(nu, nx);
  Gu << Eigen::MatrixXd::Zero(nx, nu), Eigen::MatrixXd::Identity(nu, nu);
  const Eigen::VectorXd bh = Eigen::VectorXd::Constant(nx + nu, o.box_halfwidth);
  p.Gx.assign(nnl, Gx);
  p.Gu.assign(nnl, Gu);
  p.C.assign(nnl, Box{-bh, bh});
  p.GN.assign(nl, Eigen::MatrixXd::Identity(nx, nx));
  p.CN.assign(nl, Box{Eigen::VectorXd::Constant(nx, -o.box_halfwidth),
                      Eigen::VectorXd::Constant(nx, o.box_halfwidth)});
  const auto& trr = *p.tree;
  p.risk.reserve(nnl);
  for (int i = 0; i < nnl; ++i) {
    if (o.gamma == 1.0 && !o.avar_form_at_one)
      p.risk.push_back(expectation_spec(trr.child_probs(i)));
    else
      p.risk.push_back(avar_spec(o.gamma, trr.child_probs(i)));
  }

  p.x_init = rng.normal_matrix(nx, 1, 0.0, 1.0);
  return p;
}

// The scalar chain problem: N = 1, A = B = 1, Q = R = QN = 1, no linear or
// affine terms, expectation risk, wide boxes.
inline Raocp make_scalar_chain(double x_init = 1.0) {
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching({1}));
  TinyOpts o;
  o.affine_c = false;
  o.linear_cost = false;
  Raocp p = make_tiny(tree, 1, 1, 0, o);
  p.A[0] = Eigen::MatrixXd::Ones(1, 1);
  p.B[0] = Eigen::MatrixXd::Ones(1, 1);
  p.Q[0] = Eigen::MatrixXd::Ones(1, 1);
  p.R[0] = Eigen::MatrixXd::Ones(1, 1);
  p.QN[0] = Eigen::MatrixXd::Ones(1, 1);
  p.x_init = Eigen::VectorXd::Constant(1, x_init);
  return p;
}

// Assorted small trees (all <= 15 nodes) used by projection oracles.
inline std::vector<std::shared_ptr<const ScenarioTree>> small_trees() {
  std::vector<std::shared_ptr<const ScenarioTree>> out;
  out.push_back(std::make_shared<ScenarioTree>(ScenarioTree::from_branching({1, 1, 1})));
  out.push_back(std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2, 1})));
  out.push_back(std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2, 2})));
  out.push_back(std::make_shared<ScenarioTree>(ScenarioTree::from_branching({3, 2, 1})));
  {
    std::vector<Eigen::VectorXd> cp;
    cp.push_back(Eigen::Vector3d(0.5, 0.3, 0.2));
    cp.push_back(Eigen::Vector2d(0.5, 0.5));
    cp.push_back(Eigen::Vector2d(0.25, 0.75));
    cp.push_back(Eigen::Vector2d(0.9, 0.1));
    for (int k = 0; k < 6; ++k) cp.push_back(Eigen::VectorXd::Ones(1));
    out.push_back(std::make_shared<ScenarioTree>(ScenarioTree::from_branching({3, 2, 1}, cp)));
  }
  {
    Eigen::MatrixXd tmat(2, 2);
    tmat << 0.9, 0.1, 0.4, 0.6;
    out.push_back(std::make_shared<ScenarioTree>(
        ScenarioTree::from_markov(tmat, Eigen::Vector2d(0.7, 0.3), 3, 2)));
  }
  return out;
}

}  // namespace spock::testing
