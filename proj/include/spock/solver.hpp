#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "spock/problem.hpp"
#include "spock/projections.hpp"
#include "spock/tree_operator.hpp"

namespace spock {

struct SpockParams {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  double alpha = 0.0;  // 0: set to 0.99 / power-iteration estimate of ||L||
  int aa_memory = 3;
  double c0 = 0.99, c1 = 0.99, c2 = 0.99;
  double beta = 0.5, sigma = 0.1, lambda = 1.0;
  int max_iters = 50000;
  // Backtrack cap for the line search; on cap the iteration falls back to a
  // plain Krasnoselskii-Mann step v+ = T(v), which is always admissible for
  // a firmly nonexpansive T, and is counted as a stalled step.
  int max_backtracks = 40;
  bool use_preconditioner = true;

  // iteration, ||r||_M, branch ('0','1','2' for K0/K1/K2, 'S' stalled, 'K' plain KM)
  std::function<void(int, double, char)> progress;
  // checked between iterations; true aborts the solve
  std::function<bool()> cancelled;

  void validate() const;
};

enum class SpockTermination { Converged, MaxIters, Stalled, Cancelled };

const char* to_string(SpockTermination t);

struct SpockStatus {
  int iterations = 0;
  SpockTermination reason = SpockTermination::MaxIters;
  double xi1_inf = 0.0, xi2_inf = 0.0;  // final termination residuals
  int k0_steps = 0, k1_steps = 0, k2_steps = 0, stalled_steps = 0;
  std::vector<double> rnorm_history;  // ||r^(k)||_M per iteration
  double alpha = 0.0;
  OpNormEstimate op_norm;
};

struct SolveResult {
  Eigen::VectorXd z;         // primal solution in original variables
  Eigen::VectorXd z_scaled;  // iterate pair in solver coordinates (warm-start input)
  Eigen::VectorXd eta;
  SpockStatus status;
};

struct WarmStart {
  Eigen::VectorXd z_scaled;
  Eigen::VectorXd eta;
};

// Termination residuals of a Chambolle-Pock step (z+, eta+) = T(z, eta):
//   xi1 = (z - z+)/alpha - L*(eta - eta+),
//   xi2 = (eta - eta+)/alpha - L (z - z+).
// Both infinity norms bound the perturbation of the optimality inclusions at
// the updated point.
std::pair<Eigen::VectorXd, Eigen::VectorXd> residuals_xi(const TreeOperator& op,
                                                         const Eigen::VectorXd& z,
                                                         const Eigen::VectorXd& eta,
                                                         const Eigen::VectorXd& z_next,
                                                         const Eigen::VectorXd& eta_next,
                                                         double alpha);

// Anderson extrapolation over the residual history: keeps the newest m
// residuals and residual differences, solves the least-squares problem
// min_k ||M_d k - r|| by column-pivoted QR (pivots below 1e-12 of the
// largest are dropped), and returns psi = -r - (M_r - M_d) k. Returns the
// plain direction -r for the first m+1 calls.
class AndersonAccelerator {
 public:
  explicit AndersonAccelerator(int memory);

  Eigen::VectorXd direction(const Eigen::VectorXd& r);
  int iteration() const { return k_; }
  void reset();

 private:
  int m_;
  int k_ = 0;
  std::vector<Eigen::VectorXd> res_;   // newest first, <= m
  std::vector<Eigen::VectorXd> diff_;  // newest first, <= m
};

// Chambolle-Pock iterations on the risk-averse control splitting, globalized
// by SuperMann (branches K0/K1/K2) with Anderson directions. Owns the
// preconditioned problem copy, the offline factorizations and all iteration
// buffers; a solver instance runs one solve at a time.
class SpockSolver {
 public:
  SpockSolver(const Raocp& problem, SpockParams params = {});

  SolveResult solve();  // from the problem's initial state, zero start
  SolveResult solve(const Eigen::VectorXd& x_init,
                    const std::optional<WarmStart>& warm = std::nullopt);
  // Plain v+ = T(v) iterations with the same termination criteria.
  SolveResult solve_cp();
  SolveResult solve_cp(const Eigen::VectorXd& x_init,
                       const std::optional<WarmStart>& warm = std::nullopt);

  // One application of the CP operator T at (z, eta); diagnostics/tests.
  void apply_T(const Eigen::VectorXd& z, const Eigen::VectorXd& eta, Eigen::VectorXd& z_out,
               Eigen::VectorXd& eta_out);

  double alpha() const { return alpha_; }
  const OpNormEstimate& op_norm() const { return norm_; }
  const Raocp& scaled_problem() const { return scaled_; }
  const Precond& precond() const { return pc_; }
  const TreeOperator& oper() const { return *op_; }
  const SocEpigraphData& soc_data() const { return soc_; }
  const SolverCache& cache() const { return cache_; }

  Eigen::VectorXd unscale_primal(const Eigen::VectorXd& z_scaled) const;
  Eigen::VectorXd scale_primal(const Eigen::VectorXd& z_orig) const;

 private:
  SolveResult run(const Eigen::VectorXd& x_init, const std::optional<WarmStart>& warm,
                  bool supermann);
  double m_norm_cached_Lrz(const Eigen::VectorXd& rz, const Eigen::VectorXd& reta,
                           Eigen::VectorXd& Lrz) const;

  SpockParams params_;
  Raocp scaled_;
  Precond pc_;
  SocEpigraphData soc_;
  std::unique_ptr<TreeOperator> op_;
  SolverCache cache_;
  OpNormEstimate norm_;
  double alpha_ = 0.0;
  Eigen::VectorXd x_init_orig_;
  Eigen::VectorXd d1_, d2_;  // termination residual scaling diagonals

  // iteration buffers
  Eigen::VectorXd tz_, te_, tz2_, te2_;
};

}  // namespace spock
