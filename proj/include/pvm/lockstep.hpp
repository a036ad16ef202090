#pragma once

#include <barrier>
#include <cstddef>
#include <functional>
#include <span>
#include <thread>
#include <vector>

namespace pvm {

// Persistent worker team that sweeps an index range through a fixed list of
// phases. Every worker finishes phase k before any worker starts phase k+1.
// Work is split into static contiguous chunks, so the set of indices a
// phase function sees never depends on timing.
class LockstepPool {
 public:
  using Phase = std::function<void(std::size_t index)>;

  explicit LockstepPool(unsigned threads);
  ~LockstepPool();

  LockstepPool(const LockstepPool&) = delete;
  LockstepPool& operator=(const LockstepPool&) = delete;

  unsigned threads() const { return threads_; }

  // Runs each phase over [0, count). The calling thread takes part as worker 0.
  void run(std::size_t count, std::span<const Phase> phases);

 private:
  void work(unsigned worker);
  void sweep(unsigned worker);

  unsigned threads_;
  std::barrier<> sync_;
  std::vector<std::jthread> workers_;

  // Job description, written by run() before the start barrier.
  std::size_t count_ = 0;
  std::span<const Phase> phases_;
  bool stopping_ = false;
};

// Thread count from PVM_THREADS if set, else hardware concurrency; at least 1.
unsigned default_thread_count();

}  // namespace pvm
