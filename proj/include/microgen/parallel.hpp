#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace microgen {

namespace detail {
inline std::atomic<std::size_t>& thread_cap() {
  static std::atomic<std::size_t> cap{0};
  return cap;
}
}  // namespace detail

// Caps internal parallelism. 0 means "hardware concurrency"; 1 forces the
// sequential path. Honors MICROGEN_THREADS when never set explicitly.
inline void set_thread_count(std::size_t n) { detail::thread_cap() = n; }

inline std::size_t thread_count() {
  std::size_t n = detail::thread_cap();
  if (n == 0) {
    if (const char* env = std::getenv("MICROGEN_THREADS"); env != nullptr) {
      n = static_cast<std::size_t>(std::strtoul(env, nullptr, 10));
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

// Runs body(i) for i in [0, count). Each index is owned by exactly one worker,
// so kernels that write only to storage indexed by i produce identical results
// for any thread count.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers = std::min(thread_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < count; i = next++) body(i);
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

}  // namespace microgen
