#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "spock/layout.hpp"
#include "spock/problem.hpp"

namespace spock {

struct OpNormEstimate {
  double estimate = 0.0;
  int iterations = 0;
  double analytic_bound = 0.0;
  bool converged = false;
};

// Power iteration on L*L from a fixed-seed random start; the estimate is a
// Rayleigh quotient, so it never exceeds the true norm.
OpNormEstimate estimate_norm(int nz, int neta,
                             const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply,
                             const std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>& apply_adjoint,
                             double analytic_bound, double tol = 1e-6, int max_iters = 500);

// The structured linear operator mapping the primal vector z to the image
// vector eta:
//   per non-leaf i:  ( y^i,  s^i - b^i'y^i,  Gx^i x^i + Gu^i u^i )
//   per non-root i:  stage-cost SOC block of (x^anc, u^anc, tau^i)
//   per leaf j:      ( GN^j x^j,  terminal SOC block of (x^j, s^j) )
// Never materialized; applied segmentwise with per-node parallelism. Adjoint
// sibling sums run in ascending child order. Instances hold scratch for the
// adjoint and for m_norm, so use one instance per concurrent solve.
class TreeOperator {
 public:
  TreeOperator(const Raocp& p, const SocEpigraphData& soc);

  const PrimalLayout& zlay() const { return zl_; }
  const DualLayout& elay() const { return el_; }
  const std::vector<ConeDesc>& dual_cones() const { return dual_cones_; }

  void apply(const Eigen::VectorXd& z, Eigen::VectorXd& eta) const;          // eta = L z
  void apply_adjoint(const Eigen::VectorXd& eta, Eigen::VectorXd& z) const;  // z = L* eta

  // Valid upper bound on ||L|| assembled from per-segment block norms and
  // the column multiplicity sqrt(1 + max children).
  double analytic_norm_bound() const;

  OpNormEstimate estimate_norm(double tol = 1e-6, int max_iters = 500) const;

  // ||v||_M = sqrt(||z||^2 - 2 alpha eta'Lz + ||eta||^2) for the proximal
  // preconditioner M; throws if the radicand is negative beyond roundoff
  // (signals alpha ||L|| >= 1).
  double m_norm(const Eigen::VectorXd& z, const Eigen::VectorXd& eta, double alpha) const;

 private:
  const Raocp* p_;
  const SocEpigraphData* soc_;
  PrimalLayout zl_;
  DualLayout el_;
  std::vector<ConeDesc> dual_cones_;
  mutable std::vector<Eigen::VectorXd> adj_xu_;  // per non-root child terms
  mutable Eigen::VectorXd mnorm_scratch_;
};

}  // namespace spock
