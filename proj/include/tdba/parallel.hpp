#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace tdba {

// Static block split of [0, n) over `workers` threads; body(begin, end, slot)
// must only write slot-distinct state so results are scheduling-independent.
inline void parallel_for(int n, int workers,
                         const std::function<void(int, int, int)>& body) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    body(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int begin = w * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end, w] { body(begin, end, w); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace tdba
