#include "spock/risk.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace spock {

namespace {
constexpr double kProbSumTol = 1e-12;

void check_prob_vector(const Eigen::VectorXd& p) {
  if (p.size() == 0) throw std::invalid_argument("risk: empty probability vector");
  if ((p.array() <= 0.0).any())
    throw std::invalid_argument("risk: probabilities must be positive");
  if (std::fabs(p.sum() - 1.0) > kProbSumTol)
    throw std::invalid_argument("risk: probabilities must sum to 1");
}
}  // namespace

ConeDesc dual_cone(const ConeDesc& c) {
  ConeDesc d;
  d.parts.reserve(c.parts.size());
  for (const auto& p : c.parts) {
    switch (p.kind) {
      case ConeKind::Zero:
        d.parts.push_back({ConeKind::Free, p.dim});
        break;
      case ConeKind::Free:
        d.parts.push_back({ConeKind::Zero, p.dim});
        break;
      case ConeKind::NonnegOrthant:
      case ConeKind::Soc:
        d.parts.push_back(p);  // self-dual
        break;
    }
  }
  return d;
}

void RiskSpec::validate() const {
  if (n <= 0) throw std::invalid_argument("RiskSpec: n must be positive");
  if (E.cols() != n) throw std::invalid_argument("RiskSpec: E must have n columns");
  if (b.size() != E.rows()) throw std::invalid_argument("RiskSpec: b/E row mismatch");
  if (F.size() > 0 && F.rows() != E.rows())
    throw std::invalid_argument("RiskSpec: F/E row mismatch");
  if (cone.dim() != E.rows()) throw std::invalid_argument("RiskSpec: cone/E row mismatch");
  if (kind == Kind::Avar) {
    if (pi.size() != n) throw std::invalid_argument("RiskSpec: avar pi has wrong length");
    if (F.cols() != 0) throw std::invalid_argument("RiskSpec: avar specs carry no nu variables");
    // the three shipped forms: standard stacking, max (gamma = 0), equality
    // expectation (gamma = 1)
    const bool standard = E.rows() == 2 * n + 1;
    const bool max_form = gamma == 0.0 && E.rows() == n + 1;
    const bool eq_form = gamma == 1.0 && E.rows() == n;
    if (!standard && !max_form && !eq_form)
      throw std::invalid_argument("RiskSpec: malformed avar representation");
  }
}

RiskSpec avar_spec(double gamma, const Eigen::VectorXd& pi) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("avar_spec: gamma outside [0, 1]");
  check_prob_vector(pi);
  const int n = static_cast<int>(pi.size());

  RiskSpec s;
  s.kind = RiskSpec::Kind::Avar;
  s.n = n;
  s.gamma = gamma;
  s.pi = pi;
  s.F.resize(gamma > 0.0 ? 2 * n + 1 : n + 1, 0);

  if (gamma > 0.0) {
    // mu <= pi/gamma, mu >= 0, sum mu = 1
    s.E.setZero(2 * n + 1, n);
    s.E.topRows(n) = gamma * Eigen::MatrixXd::Identity(n, n);
    s.E.middleRows(n, n) = -Eigen::MatrixXd::Identity(n, n);
    s.E.row(2 * n).setOnes();
    s.b.setZero(2 * n + 1);
    s.b.head(n) = pi;
    s.b[2 * n] = 1.0;
    s.cone.parts = {{ConeKind::NonnegOrthant, 2 * n}, {ConeKind::Zero, 1}};
  } else {
    // ambiguity set is the whole simplex: mu >= 0, sum mu = 1
    s.E.setZero(n + 1, n);
    s.E.topRows(n) = -Eigen::MatrixXd::Identity(n, n);
    s.E.row(n).setOnes();
    s.b.setZero(n + 1);
    s.b[n] = 1.0;
    s.cone.parts = {{ConeKind::NonnegOrthant, n}, {ConeKind::Zero, 1}};
  }
  s.validate();
  return s;
}

RiskSpec expectation_spec(const Eigen::VectorXd& pi) {
  check_prob_vector(pi);
  const int n = static_cast<int>(pi.size());
  RiskSpec s;
  s.kind = RiskSpec::Kind::Avar;  // gamma-tail evaluation path still applies
  s.n = n;
  s.gamma = 1.0;
  s.pi = pi;
  s.E = Eigen::MatrixXd::Identity(n, n);
  s.F.resize(n, 0);
  s.b = pi;
  s.cone.parts = {{ConeKind::Zero, n}};
  s.validate();
  return s;
}

double brute_force_lp_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& Aeq,
                          const Eigen::VectorXd& beq, const Eigen::MatrixXd& Ain,
                          const Eigen::VectorXd& bin) {
  const int d = static_cast<int>(c.size());
  const int nin = static_cast<int>(Ain.rows());
  constexpr double kFeasTol = 1e-9;

  double best = -std::numeric_limits<double>::infinity();
  bool found = false;

  std::vector<int> subset;
  auto try_subset = [&]() {
    const int rows = static_cast<int>(Aeq.rows()) + static_cast<int>(subset.size());
    Eigen::MatrixXd M(rows, d);
    Eigen::VectorXd rhs(rows);
    M.topRows(Aeq.rows()) = Aeq;
    rhs.head(Aeq.rows()) = beq;
    for (size_t k = 0; k < subset.size(); ++k) {
      M.row(Aeq.rows() + k) = Ain.row(subset[k]);
      rhs[Aeq.rows() + k] = bin[subset[k]];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(M);
    const Eigen::VectorXd x = cod.solve(rhs);
    if ((M * x - rhs).cwiseAbs().maxCoeff() > kFeasTol) return;  // inconsistent actives
    if (Aeq.rows() > 0 && (Aeq * x - beq).cwiseAbs().maxCoeff() > kFeasTol) return;
    if (nin > 0 && (Ain * x - bin).maxCoeff() > kFeasTol) return;
    best = std::max(best, c.dot(x));
    found = true;
  };

  // k = 0 covers the pure-equality candidate
  std::function<void(int, int)> rec = [&](int start, int remaining) {
    if (remaining == 0) {
      try_subset();
      return;
    }
    for (int i = start; i <= nin - remaining; ++i) {
      subset.push_back(i);
      rec(i + 1, remaining - 1);
      subset.pop_back();
    }
  };
  for (int k = 0; k <= std::min(nin, d); ++k) rec(0, k);

  if (!found) throw std::runtime_error("brute_force_lp_max: no feasible vertex (infeasible set)");
  return best;
}

double eval_risk_primal(const RiskSpec& spec, const Eigen::VectorXd& Z) {
  spec.validate();
  if (Z.size() != spec.n) throw std::invalid_argument("eval_risk_primal: Z has wrong length");

  if (spec.kind == RiskSpec::Kind::Avar) {
    if (spec.gamma == 0.0) return Z.maxCoeff();
    // gamma-tail average: fill mu greedily on the largest costs, capped at pi/gamma
    std::vector<int> order(spec.n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return Z[a] > Z[b]; });
    double remaining = 1.0, value = 0.0;
    for (int idx : order) {
      const double cap = spec.pi[idx] / spec.gamma;
      const double m = std::min(cap, remaining);
      value += m * Z[idx];
      remaining -= m;
      if (remaining <= 0.0) break;
    }
    return value;
  }

  // general polyhedral spec: split cone rows into equalities and inequalities
  int eq_rows = 0, in_rows = 0;
  for (const auto& p : spec.cone.parts) {
    if (p.kind == ConeKind::Zero)
      eq_rows += p.dim;
    else if (p.kind == ConeKind::NonnegOrthant)
      in_rows += p.dim;
    else if (p.kind == ConeKind::Soc)
      throw std::invalid_argument("eval_risk_primal: SOC cones unsupported by the LP oracle");
    // Free rows impose nothing
  }
  const int d = spec.n + static_cast<int>(spec.F.cols());
  Eigen::MatrixXd A(spec.rows(), d);
  A.leftCols(spec.n) = spec.E;
  if (spec.F.cols() > 0) A.rightCols(spec.F.cols()) = spec.F;

  Eigen::MatrixXd Aeq(eq_rows, d), Ain(in_rows, d);
  Eigen::VectorXd beq(eq_rows), bin(in_rows);
  int re = 0, ri = 0, row = 0;
  for (const auto& p : spec.cone.parts) {
    for (int k = 0; k < p.dim; ++k, ++row) {
      if (p.kind == ConeKind::Zero) {
        Aeq.row(re) = A.row(row);
        beq[re++] = spec.b[row];
      } else if (p.kind == ConeKind::NonnegOrthant) {
        // b - A w >= 0  <=>  A w <= b
        Ain.row(ri) = A.row(row);
        bin[ri++] = spec.b[row];
      }
    }
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
  c.head(spec.n) = Z;
  return brute_force_lp_max(c, Aeq, beq, Ain, bin);
}

}  // namespace spock
