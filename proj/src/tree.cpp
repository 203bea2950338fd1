#include "spock/tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spock/parallel.hpp"

namespace spock {

namespace {
constexpr double kProbSumTol = 1e-12;
constexpr double kMinNodeProb = 1e-15;

void check_prob_vector(const Eigen::VectorXd& p, const char* what) {
  if (p.size() == 0) throw std::invalid_argument(std::string(what) + ": empty probability vector");
  if ((p.array() <= 0.0).any())
    throw std::invalid_argument(std::string(what) + ": probabilities must be positive");
  if (std::fabs(p.sum() - 1.0) > kProbSumTol)
    throw std::invalid_argument(std::string(what) + ": probabilities must sum to 1");
}
}  // namespace

void ScenarioTree::finalize_topology() {
  const int n = num_nodes();
  if (n == 0) throw std::invalid_argument("ScenarioTree: empty tree");
  if (anc_[0] != -1) throw std::invalid_argument("ScenarioTree: node 0 must be the root");

  stage_.assign(n, 0);
  for (int i = 1; i < n; ++i) {
    const int a = anc_[i];
    if (a < 0 || a >= i)
      throw std::invalid_argument("ScenarioTree: ancestors must precede children");
    stage_[i] = stage_[a] + 1;
    if (stage_[i] < stage_[i - 1])
      throw std::invalid_argument("ScenarioTree: node numbering must be stage-contiguous");
  }
  horizon_ = stage_[n - 1];

  child_first_.assign(n, n);
  child_count_.assign(n, 0);
  for (int i = 1; i < n; ++i) {
    const int a = anc_[i];
    if (child_count_[a] == 0) {
      child_first_[a] = i;
    } else if (child_first_[a] + child_count_[a] != i) {
      throw std::invalid_argument("ScenarioTree: children of a node must be contiguous");
    }
    ++child_count_[a];
  }

  stage_start_.assign(horizon_ + 2, 0);
  for (int i = 0; i < n; ++i) ++stage_start_[stage_[i] + 1];
  for (int t = 0; t <= horizon_; ++t) stage_start_[t + 1] += stage_start_[t];

  for (int i = 0; i < n; ++i) {
    const bool leaf = child_count_[i] == 0;
    if (leaf != (stage_[i] == horizon_))
      throw std::invalid_argument("ScenarioTree: leaves must be exactly the horizon-stage nodes");
  }
  if (stop_stage_ < 0 || stop_stage_ > horizon_)
    throw std::invalid_argument("ScenarioTree: stop stage outside [0, horizon]");
  for (int t = stop_stage_; t < horizon_; ++t)
    for (int i = stage_begin(t); i < stage_end(t); ++i)
      if (child_count_[i] != 1)
        throw std::invalid_argument("ScenarioTree: nodes past the stop stage must have one child");

  // probability bookkeeping
  if (std::fabs(prob_[0] - 1.0) > kProbSumTol)
    throw std::invalid_argument("ScenarioTree: root probability must be 1");
  for (int i = 1; i < n; ++i) {
    if (prob_[i] < kMinNodeProb)
      throw std::invalid_argument("ScenarioTree: node probability below 1e-15");
    if (std::fabs(prob_[i] - prob_[anc_[i]] * cond_prob_[i]) > kProbSumTol)
      throw std::invalid_argument("ScenarioTree: prob(i) must equal prob(anc)*cond_prob(i)");
  }
  for (int t = 0; t <= horizon_; ++t) {
    double s = 0.0;
    for (int i = stage_begin(t); i < stage_end(t); ++i) s += prob_[i];
    if (std::fabs(s - 1.0) > kProbSumTol)
      throw std::invalid_argument("ScenarioTree: stage probabilities must sum to 1");
  }
}

Eigen::VectorXd ScenarioTree::child_probs(int node) const {
  Eigen::VectorXd p(child_count_[node]);
  for (int k = 0; k < child_count_[node]; ++k) p[k] = cond_prob_[child_first_[node] + k];
  return p;
}

ScenarioTree ScenarioTree::from_branching(const std::vector<int>& branching,
                                          const std::vector<Eigen::VectorXd>& cond_probs) {
  const int N = static_cast<int>(branching.size());
  if (N == 0) throw std::invalid_argument("from_branching: horizon must be positive");
  for (int b : branching)
    if (b < 1) throw std::invalid_argument("from_branching: branching factors must be >= 1");

  ScenarioTree tr;
  tr.anc_ = {-1};
  tr.event_ = {-1};
  tr.prob_ = {1.0};
  tr.cond_prob_ = {1.0};

  int stage_first = 0, stage_count = 1;
  int nonleaf_seen = 0;
  for (int t = 0; t < N; ++t) {
    const int b = branching[t];
    const int next_first = stage_first + stage_count;
    for (int p = stage_first; p < next_first; ++p, ++nonleaf_seen) {
      Eigen::VectorXd cp;
      if (cond_probs.empty()) {
        cp = Eigen::VectorXd::Constant(b, 1.0 / b);
      } else {
        if (nonleaf_seen >= static_cast<int>(cond_probs.size()))
          throw std::invalid_argument("from_branching: missing conditional probability vector");
        cp = cond_probs[nonleaf_seen];
        if (cp.size() != b)
          throw std::invalid_argument("from_branching: conditional probability vector has wrong length");
        check_prob_vector(cp, "from_branching");
      }
      for (int k = 0; k < b; ++k) {
        tr.anc_.push_back(p);
        tr.event_.push_back(k);
        tr.cond_prob_.push_back(cp[k]);
        tr.prob_.push_back(tr.prob_[p] * cp[k]);
      }
    }
    stage_first = next_first;
    stage_count *= b;
  }

  tr.num_events_ = *std::max_element(branching.begin(), branching.end());
  // smallest t with branching[t..] all ones
  int nb = N;
  while (nb > 0 && branching[nb - 1] == 1) --nb;
  tr.stop_stage_ = nb;
  tr.finalize_topology();
  return tr;
}

ScenarioTree ScenarioTree::from_markov(const Eigen::MatrixXd& transition,
                                       const Eigen::VectorXd& initial_event_dist, int horizon,
                                       int stop_stage) {
  const int nw = static_cast<int>(transition.rows());
  if (transition.cols() != nw) throw std::invalid_argument("from_markov: transition must be square");
  if (initial_event_dist.size() != nw)
    throw std::invalid_argument("from_markov: initial distribution has wrong length");
  if (horizon < 1) throw std::invalid_argument("from_markov: horizon must be positive");
  if (stop_stage < 0 || stop_stage > horizon)
    throw std::invalid_argument("from_markov: stop stage outside [0, horizon]");
  for (int w = 0; w < nw; ++w) {
    if ((transition.row(w).array() < 0.0).any() ||
        std::fabs(transition.row(w).sum() - 1.0) > kProbSumTol)
      throw std::invalid_argument("from_markov: transition rows must be stochastic");
  }
  if ((initial_event_dist.array() < 0.0).any() ||
      std::fabs(initial_event_dist.sum() - 1.0) > kProbSumTol)
    throw std::invalid_argument("from_markov: initial distribution must be stochastic");

  ScenarioTree tr;
  tr.anc_ = {-1};
  tr.event_ = {-1};
  tr.prob_ = {1.0};
  tr.cond_prob_ = {1.0};
  tr.num_events_ = nw;
  tr.stop_stage_ = stop_stage;

  auto most_probable = [&](const Eigen::VectorXd& row) {
    int best = 0;
    for (int w = 1; w < static_cast<int>(row.size()); ++w)
      if (row[w] > row[best]) best = w;
    return best;
  };

  int stage_first = 0, stage_next = 1;
  for (int t = 0; t < horizon; ++t) {
    const int end = stage_next;
    for (int p = stage_first; p < end; ++p) {
      const Eigen::VectorXd row =
          (t == 0) ? Eigen::VectorXd(transition.transpose() * initial_event_dist)
                   : Eigen::VectorXd(transition.row(tr.event_[p]).transpose());
      if (t < stop_stage) {
        bool any = false;
        for (int w = 0; w < nw; ++w) {
          if (row[w] <= 0.0) continue;  // pruned
          tr.anc_.push_back(p);
          tr.event_.push_back(w);
          tr.cond_prob_.push_back(row[w]);
          tr.prob_.push_back(tr.prob_[p] * row[w]);
          any = true;
        }
        if (!any) throw std::invalid_argument("from_markov: node with no positive successor");
      } else {
        const int w = most_probable(row);
        tr.anc_.push_back(p);
        tr.event_.push_back(w);
        tr.cond_prob_.push_back(1.0);  // renormalized over the kept child
        tr.prob_.push_back(tr.prob_[p]);
      }
    }
    stage_first = end;
    stage_next = static_cast<int>(tr.anc_.size());
  }

  tr.finalize_topology();
  return tr;
}

ScenarioTree ScenarioTree::from_arrays(int horizon, int stop_stage, int num_events,
                                       std::vector<int> anc, std::vector<int> event,
                                       std::vector<double> prob, std::vector<double> cond_prob) {
  ScenarioTree tr;
  tr.stop_stage_ = stop_stage;
  tr.num_events_ = num_events;
  tr.anc_ = std::move(anc);
  tr.event_ = std::move(event);
  tr.prob_ = std::move(prob);
  tr.cond_prob_ = std::move(cond_prob);
  if (tr.event_.size() != tr.anc_.size() || tr.prob_.size() != tr.anc_.size() ||
      tr.cond_prob_.size() != tr.anc_.size())
    throw std::invalid_argument("from_arrays: array lengths disagree");
  tr.finalize_topology();
  if (tr.horizon_ != horizon) throw std::invalid_argument("from_arrays: horizon mismatch");
  return tr;
}

void stage_parallel_for(const ScenarioTree& tree, int t, const std::function<void(int)>& body,
                        uint64_t body_flops) {
  global_pool().parallel_for(tree.stage_begin(t), tree.stage_end(t), body, body_flops);
}

}  // namespace spock
