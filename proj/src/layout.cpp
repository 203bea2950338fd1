#include "spock/layout.hpp"

namespace spock {

PrimalLayout make_primal_layout(const Raocp& p) {
  const auto& tr = *p.tree;
  PrimalLayout L;
  L.nx = p.nx;
  L.nu = p.nu;
  L.num_nodes = tr.num_nodes();
  L.num_nonleaf = tr.num_nonleaf();

  int off = 1 + L.num_nodes * L.nx;  // s0 + x block
  L.u_base = off - 0 * L.nu;         // u(node) = u_base + node*nu
  off += L.num_nonleaf * L.nu;

  L.y_off.resize(L.num_nonleaf);
  L.y_dim.resize(L.num_nonleaf);
  for (int i = 0; i < L.num_nonleaf; ++i) {
    L.y_off[i] = off;
    L.y_dim[i] = p.risk[i].rows();
    off += L.y_dim[i];
  }
  L.tau_base = off;
  off += L.num_nodes - 1;
  L.s_base = off;
  off += L.num_nodes - 1;
  L.n = off;
  return L;
}

DualLayout make_dual_layout(const Raocp& p, const SocEpigraphData& soc) {
  const auto& tr = *p.tree;
  DualLayout L;
  L.num_nodes = tr.num_nodes();
  L.num_nonleaf = tr.num_nonleaf();

  int off = 0;
  L.seg1_off.resize(L.num_nonleaf);
  L.seg1_nc.resize(L.num_nonleaf);
  L.seg1_ydim.resize(L.num_nonleaf);
  for (int i = 0; i < L.num_nonleaf; ++i) {
    L.seg1_off[i] = off;
    L.seg1_ydim[i] = p.risk[i].rows();
    L.seg1_nc[i] = p.C[i].dim();
    off += L.seg1_ydim[i] + 1 + L.seg1_nc[i];
  }
  L.seg2_off.resize(L.num_nodes - 1);
  L.seg2_dim.resize(L.num_nodes - 1);
  for (int i = 1; i < L.num_nodes; ++i) {
    L.seg2_off[i - 1] = off;
    L.seg2_dim[i - 1] = soc.stage[i - 1].soc_dim();
    off += L.seg2_dim[i - 1];
  }
  const int nl = tr.num_leaves();
  L.seg3_off.resize(nl);
  L.seg3_nc.resize(nl);
  L.seg3_socdim.resize(nl);
  for (int j = 0; j < nl; ++j) {
    L.seg3_off[j] = off;
    L.seg3_nc[j] = p.CN[j].dim();
    L.seg3_socdim[j] = soc.leaf[j].soc_dim();
    off += L.seg3_nc[j] + L.seg3_socdim[j];
  }
  L.n = off;
  return L;
}

}  // namespace spock
