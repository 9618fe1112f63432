#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace wigprop {

// WIGPROP_WORKERS or 1
inline int default_workers() {
  if (const char* s = std::getenv("WIGPROP_WORKERS")) {
    const int w = std::atoi(s);
    if (w > 0) return w;
  }
  return 1;
}

// Splits [0, n) into `workers` contiguous blocks, block b gets [begin_b, end_b).
// fn(block, begin, end) must only write to state owned by its block; results are
// merged by the caller in block order, which keeps output independent of scheduling.
template <class Fn>
void for_blocks(long n, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max(1L, n))));
  auto bounds = [&](int b) { return n * b / workers; };
  if (workers == 1) {
    fn(0, 0L, n);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex mu;
  for (int b = 0; b < workers; ++b)
    pool.emplace_back([&, b] {
      try {
        fn(b, bounds(b), bounds(b + 1));
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu);
        if (!err) err = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

template <class Fn>
void parallel_for(long n, int workers, Fn&& fn) {
  for_blocks(n, workers, [&](int, long b, long e) {
    for (long i = b; i < e; ++i) fn(i);
  });
}

}  // namespace wigprop
