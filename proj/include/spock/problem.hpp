#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <vector>

#include "spock/risk.hpp"
#include "spock/tree.hpp"

namespace spock {

// Axis-aligned box lo <= v <= hi.
struct Box {
  Eigen::VectorXd lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  void validate() const;
  Eigen::VectorXd project(const Eigen::VectorXd& v) const;
  double max_violation(const Eigen::VectorXd& v) const;
};

// Risk-averse optimal control problem on a scenario tree.
//
// Indexing: dynamics and stage costs sit on edges, stored at the child node
// (index 1..num_nodes-1, array offset node-1). Constraints and risks are per
// non-leaf node; terminal costs and constraints per leaf (array offset
// node - num_nonleaf).
struct Raocp {
  std::shared_ptr<const ScenarioTree> tree;
  int nx = 0, nu = 0;

  // per non-root node (offset node-1)
  std::vector<Eigen::MatrixXd> A, B;
  std::vector<Eigen::VectorXd> c;
  std::vector<Eigen::MatrixXd> Q, R;  // Q PSD, R PD
  std::vector<Eigen::VectorXd> q, r;

  // per leaf (offset node - num_nonleaf)
  std::vector<Eigen::MatrixXd> QN;  // PSD
  std::vector<Eigen::VectorXd> qN;

  // per non-leaf node
  std::vector<Eigen::MatrixXd> Gx, Gu;  // state-input constraint maps
  std::vector<Box> C;
  std::vector<RiskSpec> risk;

  // per leaf
  std::vector<Eigen::MatrixXd> GN;
  std::vector<Box> CN;

  Eigen::VectorXd x_init;

  void validate() const;

  double stage_cost(int node, const Eigen::VectorXd& x_anc, const Eigen::VectorXd& u_anc) const;
  double terminal_cost(int leaf, const Eigen::VectorXd& x) const;
};

// Second-order-cone data for the epigraph of ell(z) = z'Qz + q'z with Q PSD:
// (z, tau) in epi ell  iff  G(z, tau) - a in SOC_{p+2}, where p = rank Q,
//   G(z, tau) = (sqrtQ * S' z,  tau/2 - q_ker'z / 2,  tau/2 - q_ker'z / 2),
// S is an orthonormal basis of range Q, sqrtQ = (S'QS)^{1/2}, and q_ker the
// kernel component of q. The last coordinate is the cone axis.
struct SocQuadLin {
  int n = 0;  // ambient dimension
  int p = 0;  // rank of Q
  Eigen::MatrixXd S;          // n x p, orthonormal columns spanning range Q
  Eigen::MatrixXd sqrt_factor;  // p x p, (S'QS)^{1/2}
  Eigen::MatrixXd head_map;   // p x n, sqrt_factor * S'
  Eigen::VectorXd q_kernel;   // (I - SS')q
  Eigen::VectorXd a;          // p + 2 translation
  double lambda_max = 0.0;    // largest eigenvalue of Q

  int soc_dim() const { return p + 2; }
  Eigen::VectorXd G(const Eigen::VectorXd& z, double tau) const;
  bool epigraph_member(const Eigen::VectorXd& z, double tau, double tol = 0.0) const;
};

// Rank threshold: eigenvalues below 1e-10 * lambda_max are treated as zero.
SocQuadLin soc_data_quadlin(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q);

// Epigraph of ell(z) = z'Qz + q'z + lambda0*||z||_1 with Q PD, via auxiliary
// (theta, lambda_1..n): SOC condition on (z, tau - lambda0*theta) plus
// sum(lambda) <= theta and -lambda <= z <= lambda.
struct SocL1 {
  SocQuadLin base;
  double lambda0 = 0.0;

  struct Certificate {
    double theta;
    Eigen::VectorXd lambda;
  };
  // Feasibility of the extended system; the certificate uses the minimal
  // theta = ||z||_1, lambda = |z|.
  std::optional<Certificate> certificate(const Eigen::VectorXd& z, double tau) const;
  bool epigraph_member(const Eigen::VectorXd& z, double tau) const;
};

SocL1 soc_data_l1(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q, double lambda0);

// Epigraph of ell(z) = z'Qz + q'z + ||max(0, z - z_max)||^2, lifted with a
// vector theta >= 0, z - z_max <= theta, and the quadratic epigraph of the
// block-diagonal (Q, I) on (z, theta).
struct SocSoft {
  SocQuadLin lifted;  // over (z, theta)
  Eigen::VectorXd z_max;

  struct Certificate {
    Eigen::VectorXd theta;
  };
  std::optional<Certificate> certificate(const Eigen::VectorXd& z, double tau) const;
  bool epigraph_member(const Eigen::VectorXd& z, double tau) const;
};

SocSoft soc_data_soft(const Eigen::MatrixXd& Q, const Eigen::VectorXd& q,
                      const Eigen::VectorXd& z_max);

// Per-node epigraph data: stage nodes carry the SOC data of
// blkdiag(Q^i, R^i) with linear term (q^i, r^i) over (x^anc, u^anc); leaves
// carry the SOC data of (Q_N, q_N) over x.
struct SocEpigraphData {
  std::vector<SocQuadLin> stage;  // per non-root node (offset node-1)
  std::vector<SocQuadLin> leaf;   // per leaf (offset node - num_nonleaf)
};

SocEpigraphData soc_epigraph_data(const Raocp& p);

// Diagonal preconditioner: change of variables x~ = Sx x (non-leaf states),
// u~ = Su u, x~ = SxN x (leaf states), plus per-node constraint row scaling.
struct Precond {
  Eigen::VectorXd sx, su, sxN;          // positive diagonals
  std::vector<double> cstr_scale;       // per non-leaf node, >= 1
  double c_hat = 1.0;                   // sqrt(max children per node)

  bool is_identity = false;

  Eigen::VectorXd scale_x(const Eigen::VectorXd& x) const { return sx.cwiseProduct(x); }
  Eigen::VectorXd unscale_x(const Eigen::VectorXd& x) const { return x.cwiseQuotient(sx); }
  Eigen::VectorXd unscale_xN(const Eigen::VectorXd& x) const { return x.cwiseQuotient(sxN); }
  Eigen::VectorXd unscale_u(const Eigen::VectorXd& u) const { return u.cwiseQuotient(su); }
};

Precond identity_precond(const Raocp& p);

// Applies the cost-derived diagonal scaling of states and inputs and rescales
// all problem data so that solutions of the scaled problem map back exactly.
std::pair<Raocp, Precond> precondition(const Raocp& p);

}  // namespace spock
