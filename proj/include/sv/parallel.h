#pragma once

#include <cstdint>
#include <functional>

namespace sv {

// Global worker-count knob used by parallel_for. Defaults to 1 so all code is
// deterministic unless the caller opts in to threading.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [begin, end) across up to max_threads() workers. Work is
// split into contiguous chunks so results are independent of the thread count
// whenever iterations write to disjoint locations.
void parallel_for(int64_t begin, int64_t end,
                  const std::function<void(int64_t)>& fn);

}  // namespace sv
