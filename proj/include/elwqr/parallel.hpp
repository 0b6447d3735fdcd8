#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace elwqr {

// Run fn(i) for i in [0, count) on `threads` workers (0 = hardware count).
// Tasks must write only to their own index slots; results are then
// independent of the schedule.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  int t = threads > 0 ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  t = std::max(1, std::min(t, count));
  if (t == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(t));
  for (int worker = 0; worker < t; ++worker) {
    pool.emplace_back([&, worker]() {
      for (int i = worker; i < count; i += t) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

} // namespace elwqr
