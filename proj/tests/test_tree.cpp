#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numeric>

#include "spock/parallel.hpp"
#include "spock/rng.hpp"
#include "spock/tree.hpp"

using namespace spock;

TEST_CASE("branching [2,1] with uniform probabilities") {
  const auto tr = ScenarioTree::from_branching({2, 1});
  CHECK(tr.num_nodes() == 5);
  CHECK(tr.horizon() == 2);
  CHECK(tr.stage_begin(2) == 3);
  CHECK(tr.stage_end(2) == 5);
  CHECK(tr.prob(3) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tr.prob(4) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(tr.stop_stage() == 1);
}

TEST_CASE("deterministic chain of N ones") {
  const auto tr = ScenarioTree::from_branching(std::vector<int>(7, 1));
  CHECK(tr.num_nodes() == 8);
  for (int i = 0; i < tr.num_nodes(); ++i) CHECK(tr.prob(i) == 1.0);
  CHECK(tr.stop_stage() == 0);
}

TEST_CASE("branching [3,2,1] with explicit conditional probabilities") {
  std::vector<Eigen::VectorXd> cp;
  cp.push_back(Eigen::Vector3d(0.5, 0.3, 0.2));
  for (int k = 0; k < 3; ++k) cp.push_back(Eigen::Vector2d(0.5, 0.5));
  for (int k = 0; k < 6; ++k) cp.push_back(Eigen::VectorXd::Ones(1));
  const auto tr = ScenarioTree::from_branching({3, 2, 1}, cp);
  CHECK(tr.num_nodes() == 1 + 3 + 6 + 6);
  // leaves under the first stage-1 node multiply 0.5 * 0.5 along the path
  const int c0 = tr.child_first(1);
  for (int k = 0; k < 2; ++k) {
    const int leaf = tr.child_first(c0 + k);
    CHECK(tr.stage_of(leaf) == 3);
    CHECK(tr.prob(leaf) == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("branching rejects bad inputs") {
  CHECK_THROWS(ScenarioTree::from_branching({2, 0}));
  std::vector<Eigen::VectorXd> cp;
  cp.push_back(Eigen::Vector2d(0.7, 0.2));  // does not sum to 1
  CHECK_THROWS(ScenarioTree::from_branching({2}, cp));
  cp.clear();
  cp.push_back(Eigen::Vector2d(1.0, 0.0));  // zero probability child
  CHECK_THROWS(ScenarioTree::from_branching({2}, cp));
}

TEST_CASE("markov absorbing chain") {
  const auto tr = ScenarioTree::from_markov(Eigen::MatrixXd::Identity(2, 2),
                                            Eigen::Vector2d(1.0, 0.0), 3, 3);
  CHECK(tr.num_nodes() == 4);
  for (int i = 1; i < 4; ++i) {
    CHECK(tr.event_of(i) == 0);
    CHECK(tr.prob(i) == 1.0);
  }
}

TEST_CASE("markov uniform 2x2 gives the full binary tree") {
  Eigen::MatrixXd tmat = Eigen::MatrixXd::Constant(2, 2, 0.5);
  const auto tr = ScenarioTree::from_markov(tmat, Eigen::Vector2d(0.5, 0.5), 2, 2);
  CHECK(tr.num_nodes() == 7);
  for (int j = tr.stage_begin(2); j < tr.stage_end(2); ++j)
    CHECK(tr.prob(j) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("markov pruning keeps the most probable successor after the stop stage") {
  Eigen::MatrixXd tmat(2, 2);
  tmat << 0.9, 0.1, 0.0, 1.0;
  const auto tr = ScenarioTree::from_markov(tmat, Eigen::Vector2d(1.0, 0.0), 2, 1);
  CHECK(tr.num_nodes() == 5);
  CHECK(tr.num_nodes_at(1) == 2);
  CHECK(tr.num_nodes_at(2) == 2);
  // stage-1 events follow row 0 of the transition
  CHECK(tr.event_of(1) == 0);
  CHECK(tr.event_of(2) == 1);
  CHECK(tr.cond_prob(1) == doctest::Approx(0.9));
  CHECK(tr.cond_prob(2) == doctest::Approx(0.1));
  // pruned tails: most probable successor, conditional probability 1
  CHECK(tr.num_children(1) == 1);
  CHECK(tr.num_children(2) == 1);
  CHECK(tr.event_of(tr.child_first(1)) == 0);
  CHECK(tr.event_of(tr.child_first(2)) == 1);
  CHECK(tr.cond_prob(tr.child_first(1)) == 1.0);
}

TEST_CASE("markov rejects non-stochastic rows") {
  Eigen::MatrixXd tmat(2, 2);
  tmat << 0.9, 0.2, 0.5, 0.5;
  CHECK_THROWS(ScenarioTree::from_markov(tmat, Eigen::Vector2d(0.5, 0.5), 2, 2));
}

TEST_CASE("structure invariants on random branching trees") {
  Philox rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int N = static_cast<int>(rng.uniform_int(1, 5));
    std::vector<int> branching(N);
    for (auto& b : branching) b = static_cast<int>(rng.uniform_int(1, 3));
    const auto tr = ScenarioTree::from_branching(branching);

    for (int t = 0; t <= tr.horizon(); ++t) {
      double s = 0.0;
      for (int i = tr.stage_begin(t); i < tr.stage_end(t); ++i) s += tr.prob(i);
      CHECK(std::fabs(s - 1.0) < 1e-12);
    }
    for (int i = 0; i < tr.num_nodes(); ++i)
      for (int k = 0; k < tr.num_children(i); ++k)
        CHECK(tr.ancestor_of(tr.child_first(i) + k) == i);
    for (int i = 1; i < tr.num_nodes(); ++i) CHECK(tr.stage_of(i) >= tr.stage_of(i - 1));
  }
}

TEST_CASE("stage_parallel_for visits every node once and sums probabilities") {
  const auto tr = ScenarioTree::from_branching({3, 2, 2});
  std::atomic<int> count{0};
  std::vector<double> probs(tr.num_nodes(), 0.0);
  stage_parallel_for(tr, 3, [&](int i) {
    probs[i] = tr.prob(i);
    count.fetch_add(1);
  });
  CHECK(count.load() == tr.num_nodes_at(3));
  CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("parallel and serial per-node accumulation are bit-identical") {
  const auto tr = ScenarioTree::from_branching({3, 3, 1, 2});
  const int t = 2;
  auto body_hash = [&](int i) {
    // chaotic but deterministic per-node value
    double h = 0.917 * i + 0.1;
    for (int k = 0; k < 50; ++k) h = std::sin(h) * 1.7 + tr.prob(i);
    return h;
  };

  std::vector<double> par(tr.num_nodes(), 0.0), ser(tr.num_nodes(), 0.0);
  set_num_threads(4);
  stage_parallel_for(tr, t, [&](int i) { par[i] = body_hash(i); });
  set_num_threads(1);
  stage_parallel_for(tr, t, [&](int i) { ser[i] = body_hash(i); });
  set_num_threads(2);
  for (int i = 0; i < tr.num_nodes(); ++i) {
    CHECK(std::memcmp(&par[i], &ser[i], sizeof(double)) == 0);
  }
}

TEST_CASE("array round-trip preserves topology") {
  const auto tr = ScenarioTree::from_branching({2, 3, 1});
  const auto tr2 = ScenarioTree::from_arrays(tr.horizon(), tr.stop_stage(), tr.num_events(),
                                             tr.ancestors(), tr.events(), tr.probs(),
                                             tr.cond_probs());
  CHECK(tr2.num_nodes() == tr.num_nodes());
  for (int i = 0; i < tr.num_nodes(); ++i) {
    CHECK(tr2.ancestor_of(i) == tr.ancestor_of(i));
    CHECK(tr2.stage_of(i) == tr.stage_of(i));
    CHECK(tr2.prob(i) == tr.prob(i));
  }
}
