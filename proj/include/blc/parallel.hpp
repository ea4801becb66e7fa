// Minimal fork-join helper.  Work items are assigned round-robin, so results
// written by index do not depend on scheduling.
#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace blc {

/// Runs f(i) for i in [0, count), on several threads once each thread gets at
/// least `grain` items.  The first exception thrown by any worker is rethrown.
template <typename F>
void parallel_for(int count, F&& f, int grain = 64) {
  const int workers = std::max(
      1, std::min<int>(static_cast<int>(std::thread::hardware_concurrency()), count / std::max(1, grain)));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace blc
