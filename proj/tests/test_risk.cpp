#include <doctest.h>

#include <cmath>

#include "spock/reference.hpp"
#include "spock/risk.hpp"
#include "spock/rng.hpp"

using namespace spock;

namespace {
ConeDesc random_cone(Philox& rng) {
  ConeDesc c;
  const int parts = static_cast<int>(rng.uniform_int(1, 4));
  for (int k = 0; k < parts; ++k) {
    const int kind = static_cast<int>(rng.uniform_int(0, 3));
    const int dim = static_cast<int>(rng.uniform_int(1, 4));
    switch (kind) {
      case 0: c.parts.push_back({ConeKind::Zero, dim}); break;
      case 1: c.parts.push_back({ConeKind::NonnegOrthant, dim}); break;
      case 2: c.parts.push_back({ConeKind::Soc, dim + 1}); break;
      default: c.parts.push_back({ConeKind::Free, dim}); break;
    }
  }
  return c;
}
}  // namespace

TEST_CASE("avar spec matches the closed-form stacking for n=2, gamma=0.5") {
  const RiskSpec s = avar_spec(0.5, Eigen::Vector2d(0.5, 0.5));
  REQUIRE(s.rows() == 5);
  Eigen::MatrixXd expected(5, 2);
  expected << 0.5, 0, 0, 0.5, -1, 0, 0, -1, 1, 1;
  CHECK((s.E - expected).cwiseAbs().maxCoeff() == 0.0);
  Eigen::VectorXd b(5);
  b << 0.5, 0.5, 0, 0, 1;
  CHECK((s.b - b).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.F.cols() == 0);
  REQUIRE(s.cone.parts.size() == 2);
  CHECK(s.cone.parts[0].kind == ConeKind::NonnegOrthant);
  CHECK(s.cone.parts[0].dim == 4);
  CHECK(s.cone.parts[1].kind == ConeKind::Zero);
  CHECK(s.cone.parts[1].dim == 1);
}

TEST_CASE("avar at gamma=1 is the expectation, at gamma=0 the maximum") {
  Philox rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 5));
    const Eigen::VectorXd pi = rng.simplex(n);
    const Eigen::VectorXd Z = rng.uniform_vector(n, -3.0, 5.0);
    CHECK(eval_risk_primal(avar_spec(1.0, pi), Z) == doctest::Approx(pi.dot(Z)).epsilon(1e-12));
    CHECK(eval_risk_primal(avar_spec(0.0, pi), Z) ==
          doctest::Approx(Z.maxCoeff()).epsilon(1e-12));
  }
}

TEST_CASE("avar_spec rejects bad input") {
  CHECK_THROWS(avar_spec(1.5, Eigen::Vector2d(0.5, 0.5)));
  CHECK_THROWS(avar_spec(-0.1, Eigen::Vector2d(0.5, 0.5)));
  CHECK_THROWS(avar_spec(0.5, Eigen::Vector2d(0.6, 0.6)));
  CHECK_THROWS(avar_spec(0.5, Eigen::Vector2d(1.0, 0.0)));
}

TEST_CASE("dual cone: orthant and SOC self-dual, zero <-> free") {
  ConeDesc c;
  c.parts = {{ConeKind::NonnegOrthant, 4}, {ConeKind::Zero, 1}};
  const ConeDesc d = dual_cone(c);
  CHECK(d.parts[0].kind == ConeKind::NonnegOrthant);
  CHECK(d.parts[1].kind == ConeKind::Free);
  ConeDesc soc;
  soc.parts = {{ConeKind::Soc, 5}};
  CHECK(dual_cone(soc).parts[0].kind == ConeKind::Soc);
}

TEST_CASE("dual of dual is the identity on random cone products") {
  Philox rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const ConeDesc c = random_cone(rng);
    const ConeDesc dd = dual_cone(dual_cone(c));
    REQUIRE(dd.parts.size() == c.parts.size());
    for (size_t k = 0; k < c.parts.size(); ++k) {
      CHECK(dd.parts[k].kind == c.parts[k].kind);
      CHECK(dd.parts[k].dim == c.parts[k].dim);
    }
  }
}

TEST_CASE("gamma-tail evaluation examples") {
  CHECK(eval_risk_primal(avar_spec(0.5, Eigen::Vector2d(0.5, 0.5)), Eigen::Vector2d(1, 3)) ==
        doctest::Approx(3.0).epsilon(1e-12));
  CHECK(eval_risk_primal(avar_spec(0.0, Eigen::Vector3d(0.2, 0.5, 0.3)), Eigen::Vector3d(1, 3, 2)) ==
        doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("general-spec LP path agrees with the gamma-tail path") {
  Philox rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 4));
    const Eigen::VectorXd pi = rng.simplex(n);
    const double gamma = rng.uniform(0.05, 1.0);
    const Eigen::VectorXd Z = rng.uniform_vector(n, -2.0, 2.0);
    RiskSpec s = avar_spec(gamma, pi);
    RiskSpec g = s;
    g.kind = RiskSpec::Kind::General;  // force the LP route
    CHECK(eval_risk_primal(g, Z) == doctest::Approx(eval_risk_primal(s, Z)).epsilon(1e-9));
  }
}

TEST_CASE("coherence properties of AV@R on random instances") {
  Philox rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 5));
    const Eigen::VectorXd pi = rng.simplex(n);
    const double gamma = rng.uniform();
    const RiskSpec s = avar_spec(gamma, pi);
    const Eigen::VectorXd Z = rng.uniform_vector(n, -4.0, 4.0);

    // monotone
    Eigen::VectorXd Z2 = Z + rng.uniform_vector(n, 0.0, 1.0);
    CHECK(eval_risk_primal(s, Z2) >= eval_risk_primal(s, Z) - 1e-12);
    // translation equivariant
    const double shift = rng.uniform(-2.0, 2.0);
    CHECK(eval_risk_primal(s, Z.array() + shift) ==
          doctest::Approx(eval_risk_primal(s, Z) + shift).epsilon(1e-10));
    // interpolates expectation and max
    const double v = eval_risk_primal(s, Z);
    CHECK(v >= pi.dot(Z) - 1e-10);
    CHECK(v <= Z.maxCoeff() + 1e-10);
  }
}

TEST_CASE("AV@R duality gap vanishes on random instances") {
  Philox rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 5));
    const Eigen::VectorXd pi = rng.simplex(n);
    const double gamma = rng.uniform(0.05, 1.0);
    const RiskSpec s = avar_spec(gamma, pi);
    const Eigen::VectorXd Z = rng.uniform_vector(n, -3.0, 3.0);
    const double primal = eval_risk_primal(s, Z);
    const double dual = ref::risk_dual_value(s, Z);
    CHECK(std::fabs(primal - dual) < 1e-8);
  }
}
