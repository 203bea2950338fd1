#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "spock/parallel.hpp"
#include "spock/reference.hpp"
#include "spock/rng.hpp"
#include "spock/tree_operator.hpp"
#include "support.hpp"

using namespace spock;

namespace {

Eigen::VectorXd random_vec(Philox& rng, int n, double scale = 2.0) {
  Eigen::VectorXd v(n);
  for (int k = 0; k < n; ++k) v[k] = rng.uniform(-scale, scale);
  return v;
}

struct Setup {
  Raocp p;
  SocEpigraphData soc;
  std::unique_ptr<TreeOperator> op;
};

Setup make_setup(std::shared_ptr<const ScenarioTree> tree, int nx, int nu, uint64_t seed,
                 testing::TinyOpts o = {}) {
  Setup s;
  s.p = testing::make_tiny(std::move(tree), nx, nu, seed, o);
  s.soc = soc_epigraph_data(s.p);
  s.op = std::make_unique<TreeOperator>(s.p, s.soc);
  return s;
}

}  // namespace

TEST_CASE("zero maps to zero and the map is linear") {
  auto s = make_setup(std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2, 2})), 2, 1, 1);
  const auto& zl = s.op->zlay();
  const auto& el = s.op->elay();
  Eigen::VectorXd eta(el.n);
  s.op->apply(Eigen::VectorXd::Zero(zl.n), eta);
  CHECK(eta.cwiseAbs().maxCoeff() == 0.0);

  Philox rng(2);
  Eigen::VectorXd z1 = random_vec(rng, zl.n), z2 = random_vec(rng, zl.n);
  Eigen::VectorXd e1(el.n), e2(el.n), e3(el.n);
  s.op->apply(z1, e1);
  s.op->apply(z2, e2);
  s.op->apply(1.75 * z1 - 0.5 * z2, e3);
  const Eigen::VectorXd lin = 1.75 * e1 - 0.5 * e2;
  CHECK((e3 - lin).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, lin.cwiseAbs().maxCoeff()));
}

TEST_CASE("identity-weight chain: stage SOC segment stacks (x, u, tau/2, tau/2)") {
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching({1}));
  testing::TinyOpts o;
  o.affine_c = false;
  o.linear_cost = false;
  Raocp p = testing::make_tiny(tree, 1, 1, 3, o);
  p.A[0].setOnes();
  p.B[0].setOnes();
  p.Q[0].setOnes();
  p.R[0].setOnes();
  p.QN[0].setOnes();
  const SocEpigraphData soc = soc_epigraph_data(p);
  TreeOperator op(p, soc);
  const auto& zl = op.zlay();
  const auto& el = op.elay();

  Philox rng(4);
  Eigen::VectorXd z = random_vec(rng, zl.n);
  Eigen::VectorXd eta(el.n);
  op.apply(z, eta);
  CHECK(eta[el.stage_soc(1) + 0] == doctest::Approx(z[zl.x(0)]).epsilon(1e-14));
  CHECK(eta[el.stage_soc(1) + 1] == doctest::Approx(z[zl.u(0)]).epsilon(1e-14));
  CHECK(eta[el.stage_soc(1) + 2] == doctest::Approx(0.5 * z[zl.tau(1)]).epsilon(1e-14));
  CHECK(eta[el.stage_soc(1) + 3] == doctest::Approx(0.5 * z[zl.tau(1)]).epsilon(1e-14));
  // leaf SOC segment stacks (x_leaf, s/2, s/2)
  CHECK(eta[el.leaf_soc(0) + 0] == doctest::Approx(z[zl.x(1)]).epsilon(1e-14));
  CHECK(eta[el.leaf_soc(0) + 1] == doctest::Approx(0.5 * z[zl.s(1)]).epsilon(1e-14));
  // risk scalar row of the root reads s^0
  CHECK(eta[el.risk_scalar(0)] ==
        doctest::Approx(z[0] - p.risk[0].b.dot(z.segment(zl.y(0), zl.ydim(0)))).epsilon(1e-14));
}

TEST_CASE("adjoint identity <Lz, eta> = <z, L* eta> on random pairs") {
  Philox rng(5);
  for (auto& tree : testing::small_trees()) {
    testing::TinyOpts o;
    o.gamma = 0.6;
    o.q_rank_deficient_prob = 0.3;
    auto s = make_setup(tree, 3, 2, rng.next_u64(), o);
    const int nz = s.op->zlay().n, ne = s.op->elay().n;
    Eigen::VectorXd Lz(ne), Lte(nz);
    for (int trial = 0; trial < 100; ++trial) {
      const Eigen::VectorXd z = random_vec(rng, nz);
      const Eigen::VectorXd e = random_vec(rng, ne);
      s.op->apply(z, Lz);
      s.op->apply_adjoint(e, Lte);
      const double a = Lz.dot(e), b = z.dot(Lte);
      CHECK(std::fabs(a - b) <= 1e-10 * std::max(1.0, std::fabs(a)));
    }
  }
}

TEST_CASE("adjoint of the risk scalar row scatters into s and y slots") {
  auto s = make_setup(std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2})), 1, 1, 6);
  const auto& zl = s.op->zlay();
  const auto& el = s.op->elay();
  Eigen::VectorXd e = Eigen::VectorXd::Zero(el.n);
  e[el.risk_scalar(0)] = 1.0;
  Eigen::VectorXd z(zl.n);
  s.op->apply_adjoint(e, z);
  CHECK(z[zl.s(0)] == 1.0);
  const Eigen::VectorXd yslot = z.segment(zl.y(0), zl.ydim(0));
  CHECK((yslot + s.p.risk[0].b).cwiseAbs().maxCoeff() == 0.0);
  z[zl.s(0)] = 0.0;
  z.segment(zl.y(0), zl.ydim(0)).setZero();
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("operator is deterministic across thread counts") {
  auto s = make_setup(std::make_shared<ScenarioTree>(ScenarioTree::from_branching({3, 2, 1})), 3, 2, 7);
  Philox rng(8);
  const Eigen::VectorXd z = random_vec(rng, s.op->zlay().n);
  const Eigen::VectorXd e = random_vec(rng, s.op->elay().n);
  Eigen::VectorXd a1(s.op->elay().n), a2(s.op->elay().n);
  Eigen::VectorXd b1(s.op->zlay().n), b2(s.op->zlay().n);
  set_num_threads(4);
  s.op->apply(z, a1);
  s.op->apply_adjoint(e, b1);
  set_num_threads(1);
  s.op->apply(z, a2);
  s.op->apply_adjoint(e, b2);
  set_num_threads(2);
  CHECK((a1 - a2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((b1 - b2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("power iteration matches dense SVD on small instances") {
  Philox rng(9);
  for (auto& tree : testing::small_trees()) {
    if (tree->num_nodes() > 10) continue;
    auto s = make_setup(tree, 2, 1, rng.next_u64());
    const auto est = s.op->estimate_norm();
    const Eigen::MatrixXd L = ref::materialize(
        s.op->zlay().n, s.op->elay().n,
        [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) { s.op->apply(v, out); });
    const double svd = L.jacobiSvd().singularValues()(0);
    CHECK(est.estimate == doctest::Approx(svd).epsilon(1e-6));
    CHECK(est.converged);
    CHECK(est.estimate <= est.analytic_bound * (1.0 + 1e-6));
  }
}

TEST_CASE("power iteration on the identity callable") {
  auto ident = [](const Eigen::VectorXd& v, Eigen::VectorXd& out) { out = v; };
  const auto est = estimate_norm(10, 10, ident, ident, 1.0);
  CHECK(est.estimate == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("scaling a cost block scales the norm when that block dominates") {
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching({1, 1}));
  testing::TinyOpts o;
  o.linear_cost = false;
  Raocp p = testing::make_tiny(tree, 2, 1, 10, o);
  // zero constraint maps so the stage-cost block is the exact maximum
  for (auto& G : p.Gx) G.setZero();
  for (auto& G : p.Gu) G.setZero();
  for (auto& G : p.GN) G.setZero();
  for (auto& Q : p.Q) Q = 100.0 * Eigen::MatrixXd::Identity(2, 2);
  const SocEpigraphData s1 = soc_epigraph_data(p);
  const double n1 = TreeOperator(p, s1).estimate_norm().estimate;
  for (auto& Q : p.Q) Q *= 4.0;  // Q^{1/2} doubles
  const SocEpigraphData s2 = soc_epigraph_data(p);
  const double n2 = TreeOperator(p, s2).estimate_norm().estimate;
  CHECK(n2 == doctest::Approx(2.0 * n1).epsilon(1e-3));
}

TEST_CASE("analytic bound dominates the estimate on random instances") {
  Philox rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const int nx = static_cast<int>(rng.uniform_int(1, 4));
    const int nu = static_cast<int>(rng.uniform_int(1, 3));
    testing::TinyOpts o;
    o.gamma = rng.uniform();
    o.q_rank_deficient_prob = 0.3;
    for (auto& tree : testing::small_trees()) {
      auto s = make_setup(tree, nx, nu, rng.next_u64(), o);
      const auto est = s.op->estimate_norm();
      CHECK(est.estimate <= est.analytic_bound * (1.0 + 1e-6));
    }
  }
}

TEST_CASE("materialized operator has the predicted block sparsity") {
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2, 1}));
  auto s = make_setup(tree, 2, 1, 12);
  const auto& zl = s.op->zlay();
  const auto& el = s.op->elay();
  const auto& tr = *s.p.tree;
  const Eigen::MatrixXd L = ref::materialize(
      zl.n, el.n, [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) { s.op->apply(v, out); });

  // mark the columns each row block may touch; everything else must be zero
  Eigen::MatrixXd allowed = Eigen::MatrixXd::Zero(el.n, zl.n);
  auto allow = [&](int r0, int rn, int c0, int cn) {
    allowed.block(r0, c0, rn, cn).setOnes();
  };
  for (int i = 0; i < tr.num_nonleaf(); ++i) {
    allow(el.y_copy(i), zl.ydim(i), zl.y(i), zl.ydim(i));
    allow(el.risk_scalar(i), 1, zl.y(i), zl.ydim(i));
    allow(el.risk_scalar(i), 1, zl.s(i), 1);
    allow(el.cstr(i), el.seg1_nc[i], zl.x(i), zl.nx);
    allow(el.cstr(i), el.seg1_nc[i], zl.u(i), zl.nu);
  }
  for (int i = 1; i < tr.num_nodes(); ++i) {
    const int a = tr.ancestor_of(i);
    allow(el.stage_soc(i), el.stage_soc_dim(i), zl.x(a), zl.nx);
    allow(el.stage_soc(i), el.stage_soc_dim(i), zl.u(a), zl.nu);
    allow(el.stage_soc(i), el.stage_soc_dim(i), zl.tau(i), 1);
  }
  for (int j = 0; j < tr.num_leaves(); ++j) {
    const int node = tr.num_nonleaf() + j;
    allow(el.leaf_cstr(j), el.seg3_nc[j], zl.x(node), zl.nx);
    allow(el.leaf_soc(j), el.leaf_soc_dim(j), zl.x(node), zl.nx);
    allow(el.leaf_soc(j), el.leaf_soc_dim(j), zl.s(node), 1);
  }
  for (int r = 0; r < el.n; ++r)
    for (int c = 0; c < zl.n; ++c)
      if (allowed(r, c) == 0.0) CHECK(L(r, c) == 0.0);
}

TEST_CASE("M-norm special cases and spectral bounds") {
  auto s = make_setup(std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2, 2})), 2, 1, 13);
  Philox rng(14);
  const int nz = s.op->zlay().n, ne = s.op->elay().n;
  const Eigen::VectorXd z = random_vec(rng, nz);
  const Eigen::VectorXd e = random_vec(rng, ne);

  CHECK(s.op->m_norm(z, Eigen::VectorXd::Zero(ne), 0.3) == doctest::Approx(z.norm()).epsilon(1e-14));
  CHECK(s.op->m_norm(z, e, 0.0) ==
        doctest::Approx(std::sqrt(z.squaredNorm() + e.squaredNorm())).epsilon(1e-14));

  const double nL = s.op->estimate_norm().estimate;
  const double alpha = 0.99 / nL;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd zz = random_vec(rng, nz);
    const Eigen::VectorXd ee = random_vec(rng, ne);
    const double m2 = std::pow(s.op->m_norm(zz, ee, alpha), 2);
    const double v2 = zz.squaredNorm() + ee.squaredNorm();
    CHECK(m2 >= (1.0 - alpha * nL) * v2 - 1e-9);
    CHECK(m2 <= (1.0 + alpha * nL) * v2 + 1e-9);
  }
  // alpha far beyond 1/||L|| must trip the radicand guard for some vector;
  // use the power-iteration direction where the violation is guaranteed
  Eigen::VectorXd zdom = Eigen::VectorXd::Zero(nz);
  {
    Philox prng(1);
    for (int k = 0; k < nz; ++k) zdom[k] = prng.normal();
    Eigen::VectorXd tmp(ne), back(nz);
    for (int it = 0; it < 200; ++it) {
      s.op->apply(zdom, tmp);
      s.op->apply_adjoint(tmp, back);
      zdom = back / back.norm();
    }
    Eigen::VectorXd Lz(ne);
    s.op->apply(zdom, Lz);
    CHECK_THROWS(s.op->m_norm(zdom, Lz / Lz.norm(), 10.0 / nL));
  }
}
