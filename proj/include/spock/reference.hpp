#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "spock/layout.hpp"
#include "spock/problem.hpp"

namespace spock {
namespace ref {

// Independent, dense, slow reference implementations used by tests and the
// acceptance suite. Nothing here shares code paths with the solver kernels.

// Dynamic-programming solution of the risk-neutral (expectation) problem with
// inactive constraints: backward recursion of quadratic value functions over
// the tree. Requires AV@R risk with gamma = 1 at every node and base
// probabilities matching the tree; whether the constraints are actually
// inactive at the returned policy is for the caller to verify.
struct RiccatiSolution {
  double value = 0.0;                 // V(x_init)
  std::vector<Eigen::MatrixXd> Kfb;   // per non-leaf feedback
  std::vector<Eigen::VectorXd> kff;   // per non-leaf offset
  std::vector<Eigen::MatrixXd> W;     // per node value matrices
  std::vector<Eigen::VectorXd> w;
  std::vector<double> w0;
};

RiccatiSolution riccati_tree_solve(const Raocp& p, const Eigen::VectorXd& x_init);

// Rolls the affine dynamics forward under u^i = Kfb x^i + kff.
struct Trajectory {
  std::vector<Eigen::VectorXd> x;  // per node
  std::vector<Eigen::VectorXd> u;  // per non-leaf
};
Trajectory simulate_policy(const Raocp& p, const std::vector<Eigen::MatrixXd>& Kfb,
                           const std::vector<Eigen::VectorXd>& kff, const Eigen::VectorXd& x_init);

// Nested risk value of a fixed policy: rolls out states, then folds
// leaf-to-root through eval_risk_primal at every node. Only for tiny trees.
double nested_risk_value(const Raocp& p, const std::vector<Eigen::VectorXd>& u,
                         const Eigen::VectorXd& x_init);

// Dual value of a conic risk representation,
//   min { y'b : E'y = Z, F'y = 0, y in K* },
// by the brute-force vertex-enumeration LP. Polyhedral cones only.
double risk_dual_value(const RiskSpec& spec, const Eigen::VectorXd& Z);

// Per-constraint-family worst violations of a primal point (original
// variables, layout of make_primal_layout).
struct FeasibilityReport {
  double x0 = 0.0;             // |x^0 - x_init|_inf
  double dynamics = 0.0;       // dynamics equation residual
  double stage_box = 0.0;      // Gx x + Gu u outside C
  double leaf_box = 0.0;       // GN x outside C_N
  double risk_cone = 0.0;      // y outside K*
  double risk_scalar = 0.0;    // [b'y - s]_+
  double kernel = 0.0;         // E'y - tau - s, F'y
  double epigraph_stage = 0.0; // [ell(x,u) - tau]_+
  double epigraph_leaf = 0.0;  // [ell_N(x) - s]_+
  double soc_stage = 0.0;      // stage SOC membership margin
  double soc_leaf = 0.0;       // terminal SOC membership margin

  double max_violation() const;
};

FeasibilityReport feasibility_report(const Raocp& p, const Eigen::VectorXd& z);

// Materializes a linear map by probing basis vectors.
Eigen::MatrixXd materialize(int in_dim, int out_dim,
                            const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply);

// min ||w - v|| s.t. A w = b, solved densely through the KKT system.
Eigen::VectorXd proj_affine_kkt(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& v);

// Dense dynamics constraints G [x; u] = h over the stacked z1 block
// (x for all nodes, then u for non-leaves).
std::pair<Eigen::MatrixXd, Eigen::VectorXd> dense_dynamics_constraints(const Raocp& p,
                                                                       const Eigen::VectorXd& x_init);

// Independent verification that (z, eta) satisfies the primal-dual optimality
// inclusions up to per-component tolerances tol1 (primal space) and tol2
// (image space): normal-cone membership for the affine and kernel parts, and
// support-face distances for every cone/box segment. Residuals are reported
// relative to the tolerances (<= 1 passes).
struct KktReport {
  double primal = 0.0;      // inclusion residual / tol1, maximized
  double dual = 0.0;        // face distance / tol2, maximized
  double membership = 0.0;  // z1/z2 set memberships and dual-domain violations (absolute)
};

KktReport kkt_check(const Raocp& p, const SocEpigraphData& soc, double alpha,
                    const Eigen::VectorXd& z, const Eigen::VectorXd& eta,
                    const Eigen::VectorXd& tol1, const Eigen::VectorXd& tol2);

}  // namespace ref
}  // namespace spock
