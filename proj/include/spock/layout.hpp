#pragma once

#include <Eigen/Core>
#include <vector>

#include "spock/problem.hpp"

namespace spock {

// Flat layout of the primal vector z = (s0, x, u, y, tau, s):
//   [ s0 | x^i all nodes | u^i non-leaves | y^i non-leaves | tau^i non-root | s^i non-root ]
// Children of a node are contiguous, so the per-node groups tau^[i], s^[i]
// (one slot per child) are contiguous slices.
struct PrimalLayout {
  int n = 0;
  int nx = 0, nu = 0;
  int num_nodes = 0, num_nonleaf = 0;
  int u_base = 0, tau_base = 0, s_base = 0;
  std::vector<int> y_off;  // per non-leaf
  std::vector<int> y_dim;  // per non-leaf

  int s0() const { return 0; }
  int x(int node) const { return 1 + node * nx; }
  int u(int node) const { return u_base + node * nu; }
  int y(int node) const { return y_off[node]; }
  int ydim(int node) const { return y_dim[node]; }
  int tau(int node) const { return tau_base + (node - 1); }  // non-root
  // s^0 aliases the s0 slot; other nodes live in the s block
  int s(int node) const { return node == 0 ? 0 : s_base + (node - 1); }
};

// Flat layout of the dual (image) vector eta, grouped per node:
//   per non-leaf i:  [ y-copy rows | s^i - b'y^i | constraint rows ]
//   per non-root i:  [ stage SOC block of dim p_i + 2 ]
//   per leaf j:      [ terminal constraint rows | leaf SOC block of dim pN_j + 2 ]
struct DualLayout {
  int n = 0;
  int num_nodes = 0, num_nonleaf = 0;
  std::vector<int> seg1_off, seg1_nc;      // per non-leaf
  std::vector<int> seg1_ydim;              // per non-leaf
  std::vector<int> seg2_off, seg2_dim;     // per non-root (offset node-1)
  std::vector<int> seg3_off, seg3_nc, seg3_socdim;  // per leaf (offset node - num_nonleaf)

  int y_copy(int node) const { return seg1_off[node]; }
  int risk_scalar(int node) const { return seg1_off[node] + seg1_ydim[node]; }
  int cstr(int node) const { return seg1_off[node] + seg1_ydim[node] + 1; }
  int stage_soc(int node) const { return seg2_off[node - 1]; }
  int stage_soc_dim(int node) const { return seg2_dim[node - 1]; }
  int leaf_cstr(int leaf_idx) const { return seg3_off[leaf_idx]; }
  int leaf_soc(int leaf_idx) const { return seg3_off[leaf_idx] + seg3_nc[leaf_idx]; }
  int leaf_soc_dim(int leaf_idx) const { return seg3_socdim[leaf_idx]; }
};

PrimalLayout make_primal_layout(const Raocp& p);
DualLayout make_dual_layout(const Raocp& p, const SocEpigraphData& soc);

}  // namespace spock
