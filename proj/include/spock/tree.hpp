#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

namespace spock {

// Scenario tree with stage-contiguous, breadth-first node numbering
// (root is node 0). Stage slices are contiguous index ranges, children of a
// node are a contiguous index range, and the tree is immutable once built,
// so per-stage loops read it concurrently without synchronization.
class ScenarioTree {
 public:
  // Builds a tree from per-stage child counts. branching[t] is the number of
  // children of every node at stage t. cond_probs, when nonempty, holds one
  // conditional probability vector per non-leaf node in node order; empty
  // means uniform over children. Vectors must be positive and sum to 1
  // within 1e-12.
  static ScenarioTree from_branching(const std::vector<int>& branching,
                                     const std::vector<Eigen::VectorXd>& cond_probs = {});

  // Builds a tree driven by a Markov chain on events 0..n_w-1. transition
  // must be row-stochastic; initial_event_dist is the event distribution one
  // step before stage 1, so stage-1 nodes realize the events of
  // initial_event_dist' * transition. Nodes at stages < stop_stage branch
  // over all positive-probability successor events; from stop_stage on, each
  // node keeps its single most probable successor (ties -> lowest event
  // index) with conditional probability renormalized to 1.
  static ScenarioTree from_markov(const Eigen::MatrixXd& transition,
                                  const Eigen::VectorXd& initial_event_dist, int horizon,
                                  int stop_stage);

  int num_nodes() const { return static_cast<int>(anc_.size()); }
  int horizon() const { return horizon_; }
  int stop_stage() const { return stop_stage_; }
  int num_events() const { return num_events_; }

  int stage_of(int node) const { return stage_[node]; }
  int ancestor_of(int node) const { return anc_[node]; }
  // Children occupy the contiguous range [child_first(i), child_first(i) + num_children(i)).
  int child_first(int node) const { return child_first_[node]; }
  int num_children(int node) const { return child_count_[node]; }
  bool is_leaf(int node) const { return child_count_[node] == 0; }
  // Position of a non-root node among its siblings.
  int sibling_index(int node) const { return node - child_first_[anc_[node]]; }

  int stage_begin(int t) const { return stage_start_[t]; }
  int stage_end(int t) const { return stage_start_[t + 1]; }
  int num_nodes_at(int t) const { return stage_end(t) - stage_begin(t); }
  // Nodes at stages [0, horizon-1].
  int num_nonleaf() const { return stage_start_[horizon_]; }
  int num_leaves() const { return num_nodes() - num_nonleaf(); }

  double prob(int node) const { return prob_[node]; }
  double cond_prob(int node) const { return cond_prob_[node]; }
  // Event realized at a non-root node; -1 for the root and for trees built
  // without event labels.
  int event_of(int node) const { return event_[node]; }

  // Conditional probabilities of the children of a non-leaf node, in child order.
  Eigen::VectorXd child_probs(int node) const;

  // Raw arrays, used by serialization.
  const std::vector<int>& ancestors() const { return anc_; }
  const std::vector<int>& stages() const { return stage_; }
  const std::vector<int>& events() const { return event_; }
  const std::vector<double>& probs() const { return prob_; }
  const std::vector<double>& cond_probs() const { return cond_prob_; }

  // Rebuilds a tree from raw arrays (deserialization); validates all
  // structural invariants.
  static ScenarioTree from_arrays(int horizon, int stop_stage, int num_events,
                                  std::vector<int> anc, std::vector<int> event,
                                  std::vector<double> prob, std::vector<double> cond_prob);

 private:
  ScenarioTree() = default;
  void finalize_topology();  // derives stages, children, stage ranges; validates

  int horizon_ = 0;
  int stop_stage_ = 0;
  int num_events_ = 0;
  std::vector<int> stage_, anc_, child_first_, child_count_, event_;
  std::vector<double> prob_, cond_prob_;
  std::vector<int> stage_start_;
};

// Applies body to every node of stage t. The body may touch only data owned
// by node i and its children; reductions across siblings must be done inside
// a single body call in ascending child order. Under that contract the
// result is identical to the serial ascending loop for any thread count.
void stage_parallel_for(const ScenarioTree& tree, int t, const std::function<void(int)>& body,
                        uint64_t body_flops = 0);

}  // namespace spock
