#include <doctest.h>

#include <cmath>

#include "spock/parallel.hpp"
#include "spock/projections.hpp"
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

Eigen::VectorXd random_soc_point(Philox& rng, int d) {
  Eigen::VectorXd w = random_vec(rng, d);
  w[d - 1] = w.head(d - 1).norm() + rng.uniform(0.0, 2.0);
  return w;
}

Eigen::VectorXd z1_of(const PrimalLayout& zl, const Eigen::VectorXd& z) {
  return z.segment(1, zl.num_nodes * zl.nx + zl.num_nonleaf * zl.nu);
}

void set_z1(const PrimalLayout& zl, Eigen::VectorXd& z, const Eigen::VectorXd& z1) {
  z.segment(1, z1.size()) = z1;
}

}  // namespace

TEST_CASE("SOC projection closed forms") {
  CHECK((proj_soc(Eigen::Vector2d(1, 2)) - Eigen::Vector2d(1, 2)).norm() == 0.0);
  CHECK(proj_soc(Eigen::Vector2d(1, -2)).norm() == 0.0);
  const Eigen::VectorXd r = proj_soc(Eigen::Vector3d(3, 4, 0));
  CHECK(r[0] == doctest::Approx(1.5));
  CHECK(r[1] == doctest::Approx(2.0));
  CHECK(r[2] == doctest::Approx(2.5));
}

TEST_CASE("translated SOC projection satisfies the variational inequality") {
  Philox rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = static_cast<int>(rng.uniform_int(2, 6));
    const Eigen::VectorXd a = random_vec(rng, d);
    const Eigen::VectorXd v = 3.0 * random_vec(rng, d);
    const Eigen::VectorXd r = proj_translated_soc(v, a);
    // membership
    const Eigen::VectorXd rc = r - a;
    CHECK(rc.head(d - 1).norm() <= rc[d - 1] + 1e-12);
    // (v - r)'(w - r) <= 0 for sampled w in SOC + a
    for (int s = 0; s < 20; ++s) {
      const Eigen::VectorXd w = random_soc_point(rng, d) + a;
      CHECK((v - r).dot(w - r) <= 1e-9);
    }
  }
}

TEST_CASE("translated SOC projection basics") {
  Philox rng(3);
  const Eigen::VectorXd a = random_vec(rng, 4);
  CHECK((proj_translated_soc(a, a) - a).norm() == doctest::Approx(0.0));  // apex maps to apex
  const Eigen::VectorXd v = random_vec(rng, 4);
  CHECK((proj_translated_soc(v, Eigen::VectorXd::Zero(4)) - proj_soc(v)).norm() == 0.0);
}

TEST_CASE("dynamics factorization on the scalar chain") {
  const Raocp p = testing::make_scalar_chain();
  const SolverCache c = make_solver_cache(p);
  CHECK(c.P[1](0, 0) == doctest::Approx(1.0));
  // Rt = I + B'PB = 2, K = -Rt^{-1} B'PA = -0.5, Abar = 0.5, P0 = 1.5
  CHECK(c.K[0](0, 0) == doctest::Approx(-0.5));
  CHECK(c.Abar[0](0, 0) == doctest::Approx(0.5));
  CHECK(c.P[0](0, 0) == doctest::Approx(1.5));
}

TEST_CASE("zero input matrix reduces the factorization") {
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2, 1}));
  Raocp p = testing::make_tiny(tree, 2, 1, 4);
  for (auto& B : p.B) B.setZero();
  const SolverCache c = make_solver_cache(p);
  for (int i = 0; i < tree->num_nonleaf(); ++i) {
    CHECK(c.K[i].cwiseAbs().maxCoeff() == 0.0);
    // Rt = I: the Cholesky solve is the identity
    Eigen::VectorXd v = Eigen::VectorXd::Ones(1);
    CHECK((c.Rt_llt[i].solve(v) - v).cwiseAbs().maxCoeff() == 0.0);
  }
  for (int i = 1; i < tree->num_nodes(); ++i)
    CHECK((c.Abar[i - 1] - p.A[i - 1]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two identical equiprobable children double the Riccati sum") {
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2}));
  Raocp p = testing::make_tiny(tree, 2, 2, 5);
  p.A[1] = p.A[0];
  p.B[1] = p.B[0];
  const SolverCache c = make_solver_cache(p);
  const Eigen::MatrixXd rt_expected =
      Eigen::MatrixXd::Identity(2, 2) + 2.0 * p.B[0].transpose() * p.B[0];  // leaf P = I
  const Eigen::MatrixXd rt = c.Rt_llt[0].reconstructedMatrix();
  CHECK((rt - rt_expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scalar chain projection example") {
  // N=1, A=B=1, x_init=0, target (xbar1, ubar0) = (2, 0) -> (1, 1)
  Raocp p = testing::make_scalar_chain(0.0);
  SolverCache c = make_solver_cache(p);
  const PrimalLayout zl = make_primal_layout(p);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(zl.n);
  z[zl.x(1)] = 2.0;
  z[zl.u(0)] = 0.0;
  proj_s1(p, c, zl, p.x_init, z);
  CHECK(z[zl.x(0)] == doctest::Approx(0.0));
  CHECK(z[zl.x(1)] == doctest::Approx(1.0));
  CHECK(z[zl.u(0)] == doctest::Approx(1.0));
}

TEST_CASE("dynamics-feasible points are fixed by the projection") {
  Philox rng(6);
  for (auto& tree : testing::small_trees()) {
    Raocp p = testing::make_tiny(tree, 2, 1, rng.next_u64());
    SolverCache c = make_solver_cache(p);
    const PrimalLayout zl = make_primal_layout(p);
    // roll out a feasible trajectory from random inputs
    Eigen::VectorXd z = Eigen::VectorXd::Zero(zl.n);
    z.segment(zl.x(0), p.nx) = p.x_init;
    for (int i = 0; i < tree->num_nonleaf(); ++i) {
      z.segment(zl.u(i), p.nu) = random_vec(rng, p.nu);
      for (int k = 0; k < tree->num_children(i); ++k) {
        const int ip = tree->child_first(i) + k;
        z.segment(zl.x(ip), p.nx) = p.A[ip - 1] * z.segment(zl.x(i), p.nx) +
                                    p.B[ip - 1] * z.segment(zl.u(i), p.nu) + p.c[ip - 1];
      }
    }
    Eigen::VectorXd before = z;
    proj_s1(p, c, zl, p.x_init, z);
    CHECK((z - before).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("dynamics projection matches the dense KKT oracle on small trees") {
  Philox rng(7);
  for (auto& tree : testing::small_trees()) {
    Raocp p = testing::make_tiny(tree, 2, 1, rng.next_u64());
    SolverCache c = make_solver_cache(p);
    const PrimalLayout zl = make_primal_layout(p);
    const auto [G, h] = ref::dense_dynamics_constraints(p, p.x_init);
    for (int trial = 0; trial < 25; ++trial) {
      Eigen::VectorXd z = random_vec(rng, zl.n, 3.0);
      const Eigen::VectorXd zbar1 = z1_of(zl, z);
      proj_s1(p, c, zl, p.x_init, z);
      const Eigen::VectorXd got = z1_of(zl, z);
      const Eigen::VectorXd want = ref::proj_affine_kkt(G, h, zbar1);
      CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((G * got - h).cwiseAbs().maxCoeff() < 1e-10);  // exact dynamics
    }
  }
}

TEST_CASE("kernel projection matches the dense KKT oracle") {
  Philox rng(8);
  for (auto& tree : testing::small_trees()) {
    testing::TinyOpts o;
    o.gamma = 0.7;
    Raocp p = testing::make_tiny(tree, 2, 1, rng.next_u64(), o);
    SolverCache c = make_solver_cache(p);
    const PrimalLayout zl = make_primal_layout(p);
    for (int trial = 0; trial < 25; ++trial) {
      Eigen::VectorXd z = random_vec(rng, zl.n, 3.0);
      Eigen::VectorXd z0 = z;
      proj_s2(p, c, zl, z);
      for (int i = 0; i < tree->num_nonleaf(); ++i) {
        const int ny = zl.ydim(i);
        const int nch = tree->num_children(i);
        const int cf = tree->child_first(i);
        const int dim = ny + 2 * nch;
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nch, dim);
        M.leftCols(ny) = p.risk[i].E.transpose();
        M.block(0, ny, nch, nch) = -Eigen::MatrixXd::Identity(nch, nch);
        M.block(0, ny + nch, nch, nch) = -Eigen::MatrixXd::Identity(nch, nch);
        auto gather = [&](const Eigen::VectorXd& v) {
          Eigen::VectorXd w(dim);
          w.head(ny) = v.segment(zl.y(i), ny);
          w.segment(ny, nch) = v.segment(zl.tau(cf), nch);
          w.segment(ny + nch, nch) = v.segment(zl.s(cf), nch);
          return w;
        };
        const Eigen::VectorXd got = gather(z);
        const Eigen::VectorXd want =
            ref::proj_affine_kkt(M, Eigen::VectorXd::Zero(nch), gather(z0));
        CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((M * got).cwiseAbs().maxCoeff() < 1e-9);
      }
      // z1 and s0 untouched
      CHECK((z1_of(zl, z) - z1_of(zl, z0)).cwiseAbs().maxCoeff() == 0.0);
      CHECK(z[0] == z0[0]);
    }
  }
}

TEST_CASE("kernel projectors are idempotent and symmetric") {
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching({3, 2}));
  testing::TinyOpts o;
  o.gamma = 0.3;
  Raocp p = testing::make_tiny(tree, 2, 1, 9, o);
  const SolverCache c = make_solver_cache(p);
  for (const auto& N : c.s2_proj) {
    CHECK((N * N - N).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((N - N.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("image-set projection: feasible points unchanged, segments independent") {
  Philox rng(10);
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2, 2}));
  testing::TinyOpts o;
  o.gamma = 0.5;
  o.box_halfwidth = 1.0;
  Raocp p = testing::make_tiny(tree, 2, 1, 11, o);
  const SocEpigraphData soc = soc_epigraph_data(p);
  const DualLayout el = make_dual_layout(p, soc);
  std::vector<ConeDesc> dk;
  for (int i = 0; i < tree->num_nonleaf(); ++i) dk.push_back(dual_cone(p.risk[i].cone));

  // feasible eta: build each segment inside its set
  Eigen::VectorXd eta(el.n);
  for (int i = 0; i < tree->num_nonleaf(); ++i) {
    const int ny = el.seg1_ydim[i];
    eta.segment(el.y_copy(i), ny) = random_vec(rng, ny).cwiseAbs();  // orthant x R part
    eta[el.risk_scalar(i)] = rng.uniform(0.0, 1.0);
    eta.segment(el.cstr(i), el.seg1_nc[i]) =
        p.C[i].project(random_vec(rng, el.seg1_nc[i], 2.0));
  }
  for (int i = 1; i < tree->num_nodes(); ++i) {
    const int d = el.stage_soc_dim(i);
    eta.segment(el.stage_soc(i), d) = random_soc_point(rng, d) + soc.stage[i - 1].a;
  }
  for (int j = 0; j < tree->num_leaves(); ++j) {
    eta.segment(el.leaf_cstr(j), el.seg3_nc[j]) =
        p.CN[j].project(random_vec(rng, el.seg3_nc[j], 2.0));
    const int d = el.leaf_soc_dim(j);
    eta.segment(el.leaf_soc(j), d) = random_soc_point(rng, d) + soc.leaf[j].a;
  }
  Eigen::VectorXd before = eta;
  proj_s3(p, soc, el, dk, eta);
  CHECK((eta - before).cwiseAbs().maxCoeff() < 1e-12);

  // negative risk scalar clamps to zero
  eta[el.risk_scalar(0)] = -1.0;
  proj_s3(p, soc, el, dk, eta);
  CHECK(eta[el.risk_scalar(0)] == 0.0);

  // parallel and serial runs are bit-identical
  Eigen::VectorXd e1 = random_vec(rng, el.n, 3.0);
  Eigen::VectorXd e2 = e1;
  set_num_threads(4);
  proj_s3(p, soc, el, dk, e1);
  set_num_threads(1);
  proj_s3(p, soc, el, dk, e2);
  set_num_threads(2);
  CHECK((e1 - e2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("projections are idempotent and nonexpansive") {
  Philox rng(12);
  auto tree = std::make_shared<ScenarioTree>(ScenarioTree::from_branching({2, 2, 1}));
  testing::TinyOpts o;
  o.gamma = 0.4;
  o.box_halfwidth = 0.8;
  Raocp p = testing::make_tiny(tree, 2, 2, 13, o);
  SolverCache c = make_solver_cache(p);
  const PrimalLayout zl = make_primal_layout(p);
  const SocEpigraphData soc = soc_epigraph_data(p);
  const DualLayout el = make_dual_layout(p, soc);
  std::vector<ConeDesc> dk;
  for (int i = 0; i < tree->num_nonleaf(); ++i) dk.push_back(dual_cone(p.risk[i].cone));

  for (int trial = 0; trial < 20; ++trial) {
    // S1
    Eigen::VectorXd a = random_vec(rng, zl.n, 3.0), b = random_vec(rng, zl.n, 3.0);
    Eigen::VectorXd pa = a, pb = b;
    proj_s1(p, c, zl, p.x_init, pa);
    proj_s1(p, c, zl, p.x_init, pb);
    Eigen::VectorXd paa = pa;
    proj_s1(p, c, zl, p.x_init, paa);
    CHECK((paa - pa).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((z1_of(zl, pa) - z1_of(zl, pb)).norm() <=
          (z1_of(zl, a) - z1_of(zl, b)).norm() + 1e-12);
    // firm nonexpansiveness of the affine projection
    const double lhs = (z1_of(zl, pa) - z1_of(zl, pb)).squaredNorm();
    const double rhs = (z1_of(zl, a) - z1_of(zl, b)).dot(z1_of(zl, pa) - z1_of(zl, pb));
    CHECK(lhs <= rhs + 1e-9);

    // S2
    pa = a;
    pb = b;
    proj_s2(p, c, zl, pa);
    proj_s2(p, c, zl, pb);
    paa = pa;
    proj_s2(p, c, zl, paa);
    CHECK((paa - pa).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((pa - pb).norm() <= (a - b).norm() + 1e-12);

    // S3
    Eigen::VectorXd ea = random_vec(rng, el.n, 3.0), eb = random_vec(rng, el.n, 3.0);
    Eigen::VectorXd qa = ea, qb = eb;
    proj_s3(p, soc, el, dk, qa);
    proj_s3(p, soc, el, dk, qb);
    Eigen::VectorXd qaa = qa;
    proj_s3(p, soc, el, dk, qaa);
    CHECK((qaa - qa).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((qa - qb).norm() <= (ea - eb).norm() + 1e-12);
  }
}
