#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace elmdoc {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> value{0};
  return value;
}
// Set inside worker bodies; nested parallel_for calls then run inline.
inline bool& in_parallel_region() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

/// Worker count used by the parallel kernels. 0 (the initial value) means
/// ELMDOC_THREADS if set, else the hardware concurrency.
inline unsigned num_threads() {
  unsigned n = detail::thread_setting().load(std::memory_order_relaxed);
  if (n != 0) return n;
  if (const char* env = std::getenv("ELMDOC_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline void set_num_threads(unsigned n) { detail::thread_setting().store(n, std::memory_order_relaxed); }

/// Calls fn(lo, hi) on disjoint contiguous chunks covering [begin, end).
/// Every index is handled by exactly one call, so results never depend on
/// the worker count as long as fn writes only to its own chunk.
template <class Fn>
void parallel_for(std::size_t begin, std::size_t end, Fn&& fn, std::size_t grain = 1) {
  if (end <= begin) return;
  const std::size_t total = end - begin;
  std::size_t workers = std::min<std::size_t>(num_threads(), (total + grain - 1) / grain);
  if (workers <= 1 || detail::in_parallel_region()) {
    fn(begin, end);
    return;
  }
  const std::size_t chunk = (total + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t lo = begin + w * chunk;
    const std::size_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, w, lo, hi] {
      detail::in_parallel_region() = true;
      try {
        fn(lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  detail::in_parallel_region() = true;
  try {
    fn(begin, std::min(end, begin + chunk));
  } catch (...) {
    errors[0] = std::current_exception();
  }
  detail::in_parallel_region() = false;
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace elmdoc
