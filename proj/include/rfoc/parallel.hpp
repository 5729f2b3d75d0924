#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rfoc {

/// Spatial points are processed in fixed-size blocks. The block layout does not
/// depend on the worker count, so per-block partial sums reduced in block
/// order give bitwise identical results for any number of workers.
inline constexpr int kPointBlock = 32;

inline int block_count(int points) { return (points + kPointBlock - 1) / kPointBlock; }

inline int default_workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(block, first, last) for each block of [0, points).
template <class Body>
void for_each_block(int points, int workers, Body &&body) {
  const int blocks = block_count(points);
  auto run_block = [&](int b) {
    const int first = b * kPointBlock;
    body(b, first, std::min(points, first + kPointBlock));
  };
  workers = std::clamp(workers, 1, std::max(blocks, 1));
  if (workers == 1) {
    for (int b = 0; b < blocks; ++b)
      run_block(b);
    return;
  }

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int b = next++; b < blocks; b = next++) {
      try {
        run_block(b);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error)
          error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w)
      pool.emplace_back(worker);
    worker();
  }
  if (error)
    std::rethrow_exception(error);
}

} // namespace rfoc
