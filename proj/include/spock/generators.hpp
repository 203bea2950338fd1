#pragma once

#include <cstdint>
#include <string>

#include "spock/problem.hpp"
#include "spock/rng.hpp"

namespace spock {

// Random benchmark problem family: iid event trees with stopped branching,
// random dynamics around the identity, random PSD/PD costs, box state and
// input constraints, AV@R risk at a random level.
struct Case1Dims {
  int N = 0;       // horizon
  int nb = 0;      // stop stage
  int nw = 0;      // events
  int nu = 0;      // inputs; states nx
  int nx = 0;
  int64_t nv = 0;  // variable count of the sampled tree
};

// Joint rejection sampler for (N, nb, nw, nu): N ~ U{5..15}, 1<=nb<=3,
// 2<=nw<=10, 10<=nu<=300, nx = 2 nu, accepted when the variable count
// n_v = nx|nodes(0,N)| + nu|nodes(0,N-1)| lands in [1e3, 1e5]
// ([1e3, 1e4] at desk scale).
Case1Dims sample_case1_dims(Philox& rng, bool desk_scale);

// Samples problem data for given dimensions (used directly for pinned-size
// instances). Consumes the generator stream in a fixed documented order.
Raocp gen_case1(Philox& rng, const Case1Dims& dims);

Raocp gen_case1_instance(uint64_t seed, bool desk_scale);

// Networked-control-system family with stochastic sensor-to-controller delay:
// the delay fraction follows a Beta-martingale scenario tree (equiprobable
// children at Beta quantile midpoints), the continuous-time plant
// xdot = Ac x + Bc u with diagonal Ac = I + diag(a) is discretized exactly
// under zero-order hold with per-node input delay, and the state is augmented
// with the previous input.
struct NcsOptions {
  enum class Shape { HighInitial, TwoStage };
  Shape shape = Shape::HighInitial;
  int n = 4;          // scenario parameter: n^2 scenarios
  int N = 48;         // horizon
  int nx = 100;       // plant states (augmented problem has nx + nu)
  int nu = 50;
  double T = 5.0;     // sampling interval
  double theta = 1.0;
  double phi0 = 0.1;
  double gamma = 0.95;  // AV@R level
};

Raocp gen_ncs(uint64_t seed, const NcsOptions& opt);

// ZOH discretization of xdot = Ac x + Bc u with input delay sigma in [0, T]:
// the previous input acts on [0, sigma), the current one on [sigma, T].
// Returns the augmented pair over (x, u_prev).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_delayed(const Eigen::MatrixXd& Ac,
                                                               const Eigen::MatrixXd& Bc, double T,
                                                               double sigma);

}  // namespace spock
