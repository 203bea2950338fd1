#include "spock/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace spock {

namespace {
// Workers spin briefly before sleeping so that back-to-back per-stage loops
// dispatch in microseconds; the cv path covers long serial sections.
constexpr int kSpinRounds = 20000;
}  // namespace

struct ThreadPool::Impl {
  explicit Impl(int n) : nthreads(n) {
    if (n < 1) throw std::invalid_argument("ThreadPool: need at least 1 thread");
    workers.reserve(static_cast<size_t>(n) - 1);
    for (int t = 1; t < n; ++t) {
      workers.emplace_back([this, t] { worker_loop(t); });
    }
  }

  ~Impl() {
    {
      std::unique_lock<std::mutex> lk(mtx);
      stop.store(true, std::memory_order_release);
      epoch.fetch_add(1, std::memory_order_release);
    }
    cv_start.notify_all();
    for (auto& w : workers) w.join();
  }

  void worker_loop(int tid) {
    uint64_t seen = 0;
    for (;;) {
      uint64_t e = epoch.load(std::memory_order_acquire);
      int spins = 0;
      while (e == seen && !stop.load(std::memory_order_acquire)) {
        if (++spins < kSpinRounds) {
          std::this_thread::yield();
        } else {
          std::unique_lock<std::mutex> lk(mtx);
          cv_start.wait(lk, [&] {
            return epoch.load(std::memory_order_acquire) != seen ||
                   stop.load(std::memory_order_acquire);
          });
        }
        e = epoch.load(std::memory_order_acquire);
      }
      if (stop.load(std::memory_order_acquire)) return;
      seen = e;
      run_chunk(tid);
      pending.fetch_sub(1, std::memory_order_acq_rel);
    }
  }

  void run_chunk(int tid) {
    const int n = job_end - job_begin;
    const int per = (n + nthreads - 1) / nthreads;
    const int lo = job_begin + tid * per;
    const int hi = std::min(job_end, lo + per);
    for (int i = lo; i < hi; ++i) (*job)(i);
  }

  void parallel_for(int begin, int end, const std::function<void(int)>& body,
                    uint64_t body_flops) {
    if (end <= begin) return;
    const uint64_t count = static_cast<uint64_t>(end - begin);
    // a dispatch round-trip costs on the order of 10 us; stay serial unless
    // the loop clearly pays for it
    const bool worth_it =
        count >= 256 || count * std::max<uint64_t>(body_flops, 1) >= 120000;
    if (nthreads == 1 || count == 1 || !worth_it) {
      for (int i = begin; i < end; ++i) body(i);
      return;
    }
    job = &body;
    job_begin = begin;
    job_end = end;
    pending.store(nthreads - 1, std::memory_order_release);
    {
      std::unique_lock<std::mutex> lk(mtx);
      epoch.fetch_add(1, std::memory_order_release);
    }
    cv_start.notify_all();
    run_chunk(0);
    // spin for the stragglers; chunks are short-lived by construction
    while (pending.load(std::memory_order_acquire) != 0) std::this_thread::yield();
    job = nullptr;
  }

  int nthreads;
  std::vector<std::thread> workers;
  std::mutex mtx;
  std::condition_variable cv_start;
  std::atomic<uint64_t> epoch{0};
  std::atomic<bool> stop{false};
  const std::function<void(int)>* job = nullptr;
  int job_begin = 0, job_end = 0;
  std::atomic<int> pending{0};
};

ThreadPool::ThreadPool(int num_threads) : impl_(new Impl(num_threads)) {}
ThreadPool::~ThreadPool() { delete impl_; }
int ThreadPool::num_threads() const { return impl_->nthreads; }

void ThreadPool::parallel_for(int begin, int end, const std::function<void(int)>& body,
                              uint64_t body_flops) {
  impl_->parallel_for(begin, end, body, body_flops);
}

namespace {
std::unique_ptr<ThreadPool>& pool_slot() {
  static std::unique_ptr<ThreadPool> pool;
  return pool;
}
}  // namespace

ThreadPool& global_pool() {
  auto& slot = pool_slot();
  if (!slot) {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    slot = std::make_unique<ThreadPool>(n > 0 ? n : 1);
  }
  return *slot;
}

void set_num_threads(int n) { pool_slot() = std::make_unique<ThreadPool>(n); }

int num_threads() { return global_pool().num_threads(); }

}  // namespace spock
