#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace ecosel {

/// Resolve a thread-count setting: 0 means "use all logical CPUs".
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Run fn(i) for i in [0, count). Work is split into contiguous blocks, one
/// per worker; callers must only write to slots indexed by i so results are
/// identical for any thread count.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  const int nthreads = resolve_threads(threads);
  if (nthreads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(nthreads, count);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  const std::size_t chunk = (count + nw - 1) / nw;
  for (std::size_t w = 0; w < nw; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(count, lo + chunk);
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ecosel
