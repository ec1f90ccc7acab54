#include "sv/parallel.h"

#include <algorithm>
#include <thread>
#include <vector>

namespace sv {

namespace {
int g_max_threads = 1;
}  // namespace

void set_max_threads(int n) { g_max_threads = std::max(1, n); }

int max_threads() { return g_max_threads; }

void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t)>& fn) {
  const int64_t count = end - begin;
  if (count <= 0) return;

  const int threads =
      static_cast<int>(std::min<int64_t>(g_max_threads, count));
  if (threads <= 1) {
    for (int64_t i = begin; i < end; ++i) fn(i);
    return;
  }

  const int64_t chunk = (count + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    const int64_t lo = begin + t * chunk;
    const int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace sv
