#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <vector>

#include "spock/layout.hpp"
#include "spock/problem.hpp"

namespace spock {

// Euclidean projection onto the second-order cone; the LAST coordinate is
// the cone axis. dim >= 2.
void proj_soc_inplace(Eigen::Ref<Eigen::VectorXd> v);
Eigen::VectorXd proj_soc(const Eigen::VectorXd& v);

// Projection onto SOC + a.
Eigen::VectorXd proj_translated_soc(const Eigen::VectorXd& v, const Eigen::VectorXd& a);

// Componentwise projection onto a product of primitive cones.
void proj_cone_inplace(const ConeDesc& cone, Eigen::Ref<Eigen::VectorXd> v);

// Offline factorizations reused by every iteration:
//  - Riccati-style factors for the dynamics projection: for leaves P = I;
//    backward over stages Rt^i = I + sum B'P B (Cholesky kept),
//    K^i = -Rt^{-1} sum B'P A, Abar = A + BK, P^i = I + K'K + sum Abar'P Abar.
//  - Orthogonal projectors onto ker [E' -I -I; F' 0 0] per non-leaf node,
//    built from a rank-revealing decomposition (threshold 1e-12) and stored
//    dense.
//  - Scratch buffers for the online passes; a cache instance therefore
//    serves one solve at a time.
struct SolverCache {
  std::vector<Eigen::MatrixXd> P;                    // per node
  std::vector<Eigen::MatrixXd> K;                    // per non-leaf
  std::vector<Eigen::LLT<Eigen::MatrixXd>> Rt_llt;   // per non-leaf
  std::vector<Eigen::MatrixXd> Abar;                 // per non-root (offset node-1)
  std::vector<Eigen::MatrixXd> s2_proj;              // per non-leaf

  // online scratch
  std::vector<Eigen::VectorXd> q_scr;   // per node, nx
  std::vector<Eigen::VectorXd> d_scr;   // per non-leaf, nu
  std::vector<Eigen::VectorXd> term_u;  // per non-root, nu
  std::vector<Eigen::VectorXd> term_x;  // per non-root, nx
  std::vector<Eigen::VectorXd> adj_xu;  // per non-root, nx+nu (adjoint child terms)
};

SolverCache make_solver_cache(const Raocp& p);

// Projection of the stacked (x, u) block of z onto the affine dynamics set
// { x^0 = x_init, x^i = A^i x^anc + B^i u^anc + c^i }. In place; backward
// pass per stage, then forward rollout. Sibling sums run in ascending child
// order (deterministic for any thread count).
void proj_s1(const Raocp& p, SolverCache& cache, const PrimalLayout& zl,
             const Eigen::VectorXd& x_init, Eigen::Ref<Eigen::VectorXd> z);

// Projection of the per-node (y, tau^[i], s^[i]) groups onto the kernel sets;
// multiplies the cached dense projector per non-leaf node. In place.
void proj_s2(const Raocp& p, const SolverCache& cache, const PrimalLayout& zl,
             Eigen::Ref<Eigen::VectorXd> z);

// Projection of an eta-shaped buffer onto
//   prod_i (K_i^* x R_+ x C^i)  x  prod_i (SOC + a^i)  x  prod_j (C_N x (SOC + a_N)).
// Segments are independent; in place.
void proj_s3(const Raocp& p, const SocEpigraphData& soc, const DualLayout& el,
             const std::vector<ConeDesc>& dual_cones, Eigen::Ref<Eigen::VectorXd> eta);

}  // namespace spock
