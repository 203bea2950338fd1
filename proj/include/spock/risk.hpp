#pragma once

#include <Eigen/Core>
#include <vector>

namespace spock {

enum class ConeKind { Zero, NonnegOrthant, Soc, Free };

struct ConePart {
  ConeKind kind;
  int dim;
};

// Ordered product of primitive cones.
struct ConeDesc {
  std::vector<ConePart> parts;

  int dim() const {
    int d = 0;
    for (const auto& p : parts) d += p.dim;
    return d;
  }
};

ConeDesc dual_cone(const ConeDesc& c);

// Conic representation of a coherent risk measure over n outcomes:
//   rho(Z) = max { mu'Z : b - E mu - F nu in K }.
// The avar tag keeps the closed-form evaluation path; general specs carry
// only (E, F, b, K).
struct RiskSpec {
  enum class Kind { Avar, General };

  Kind kind = Kind::General;
  int n = 0;  // number of outcomes (children of the tree node)
  Eigen::MatrixXd E;
  Eigen::MatrixXd F;  // n_nu = F.cols(), possibly 0
  Eigen::VectorXd b;
  ConeDesc cone;

  // Avar only:
  double gamma = 1.0;
  Eigen::VectorXd pi;

  int rows() const { return static_cast<int>(E.rows()); }
  void validate() const;
};

// AV@R at level gamma in [0, 1] with base probabilities pi.
// gamma = 1 is the expectation (ambiguity set {pi}); gamma = 0 is the
// maximum, built directly on the simplex ambiguity set since pi/gamma is
// undefined there.
RiskSpec avar_spec(double gamma, const Eigen::VectorXd& pi);

// Expectation risk in equality form: E = I, b = pi, K = {0}^n, so mu = pi is
// pinned with no redundant rows. Semantically identical to avar_spec(1, pi)
// but with fully determined dual variables; first-order iterations on the
// AV@R form at gamma = 1 are slowed badly by its degenerate dual faces, so
// risk-neutral problems should prefer this builder.
RiskSpec expectation_spec(const Eigen::VectorXd& pi);

// Test oracle: evaluates rho(Z) by brute force. AV@R specs use the gamma-tail
// average (greedy vertex of the ambiguity polytope); general specs must have
// a polyhedral cone and are solved by exhaustive active-set vertex
// enumeration, so keep n small.
double eval_risk_primal(const RiskSpec& spec, const Eigen::VectorXd& Z);

// Exhaustive active-set LP: maximize c'x subject to Aeq x = beq, Ain x <= bin,
// via vertex enumeration over every inequality subset of size <= dim(x).
// Test oracle; assumes the optimum is attained at a vertex and throws when no
// feasible vertex exists.
double brute_force_lp_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& Aeq,
                          const Eigen::VectorXd& beq, const Eigen::MatrixXd& Ain,
                          const Eigen::VectorXd& bin);

}  // namespace spock
