#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace spock {

// Philox4x32-10 counter-based generator. Chosen over std::mt19937 so that
// generated problem suites are reproducible across platforms and languages:
// the algorithm, the key/counter schedule and every derived distribution
// below are fixed here, not delegated to the standard library.
class Philox {
 public:
  explicit Philox(uint64_t seed, uint64_t stream = 0);

  uint32_t next_u32();
  uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer on [lo, hi], inclusive, unbiased via rejection.
  int64_t uniform_int(int64_t lo, int64_t hi);
  // Standard normal via Box-Muller (one spare cached).
  double normal();
  double normal(double mean, double stddev);
  // Uniform on the probability simplex (normalized exponential spacings).
  Eigen::VectorXd simplex(int n);

  Eigen::VectorXd uniform_vector(int n, double lo, double hi);
  Eigen::MatrixXd normal_matrix(int rows, int cols, double mean, double stddev);

 private:
  void refill();

  uint32_t key_[2];
  uint32_t counter_[4];
  uint32_t block_[4];
  int pos_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace spock
