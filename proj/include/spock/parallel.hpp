#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace spock {

// Fixed-size worker pool used for per-stage and per-node loops.
//
// parallel_for partitions [begin, end) into static contiguous chunks, one per
// worker. Bodies must write only to disjoint, index-owned data; under that
// contract the result is bit-identical to the serial ascending loop for any
// thread count.
class ThreadPool {
 public:
  explicit ThreadPool(int num_threads);
  ~ThreadPool();

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int num_threads() const;

  // body_flops is a rough per-body work estimate; loops whose total work is
  // too small to amortize a dispatch run serially. The serial/parallel choice
  // depends only on the hint and the trip count, never on the thread count,
  // and bodies write disjoint data, so results are identical either way.
  void parallel_for(int begin, int end, const std::function<void(int)>& body,
                    uint64_t body_flops = 0);

 private:
  struct Impl;
  Impl* impl_;
};

// Global pool shared by the solver kernels. set_num_threads rebuilds it;
// callers must not hold references across a rebuild.
ThreadPool& global_pool();
void set_num_threads(int n);
int num_threads();

}  // namespace spock
