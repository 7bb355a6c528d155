#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace nlos {

inline int resolve_workers(int workers) {
  if (workers > 0) return workers;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs fn(i) for i in [0, n). Each index is processed exactly once and
/// writes only to its own output slot, so results do not depend on the
/// worker count or schedule.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  int w = resolve_workers(workers);
  if (w <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(w), n);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (std::size_t t = 0; t < nw; ++t) {
    std::size_t begin = n * t / nw;
    std::size_t end = n * (t + 1) / nw;
    pool.emplace_back([begin, end, &fn] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace nlos
