#include "pvm/lockstep.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

namespace pvm {

LockstepPool::LockstepPool(unsigned threads)
    : threads_(std::max(1u, threads)), sync_(static_cast<std::ptrdiff_t>(threads_)) {
  workers_.reserve(threads_ - 1);
  for (unsigned w = 1; w < threads_; ++w) {
    workers_.emplace_back([this, w] { work(w); });
  }
}

LockstepPool::~LockstepPool() {
  stopping_ = true;
  if (threads_ > 1) sync_.arrive_and_wait();
}

void LockstepPool::run(std::size_t count, std::span<const Phase> phases) {
  count_ = count;
  phases_ = phases;
  if (threads_ == 1) {
    for (const Phase& phase : phases_)
      for (std::size_t i = 0; i < count_; ++i) phase(i);
    return;
  }
  sync_.arrive_and_wait();  // release workers
  sweep(0);
}

void LockstepPool::work(unsigned worker) {
  for (;;) {
    sync_.arrive_and_wait();
    if (stopping_) return;
    sweep(worker);
  }
}

void LockstepPool::sweep(unsigned worker) {
  const std::size_t chunk = (count_ + threads_ - 1) / threads_;
  const std::size_t lo = std::min(count_, chunk * worker);
  const std::size_t hi = std::min(count_, lo + chunk);
  for (const Phase& phase : phases_) {
    for (std::size_t i = lo; i < hi; ++i) phase(i);
    sync_.arrive_and_wait();
  }
}

unsigned default_thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PVM_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
    } catch (const std::exception&) {
      // Ignore malformed values.
    }
  }
  return n;
}

}  // namespace pvm
