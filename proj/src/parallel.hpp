#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lar::detail {

// Runs fn(shard_index, begin, end) over [0, n) split into contiguous ranges,
// one per shard. shards == number of calls even when threads == 1, so callers
// can keep per-shard state and merge it in a fixed order regardless of the
// thread count. First exception is rethrown.
template <typename Fn>
void parallel_shards(std::size_t n, unsigned threads, Fn&& fn) {
  unsigned shards = std::max(1u, threads);
  if (n == 0) return;
  shards = static_cast<unsigned>(std::min<std::size_t>(shards, n));
  std::size_t chunk = (n + shards - 1) / shards;
  if (shards == 1) {
    fn(0, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(shards);
  for (unsigned s = 0; s < shards; ++s) {
    std::size_t begin = std::size_t{s} * chunk;
    std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, s, begin, end] {
      try {
        fn(s, begin, end);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline unsigned shard_count(std::size_t n, unsigned threads) {
  unsigned shards = std::max(1u, threads);
  if (n == 0) return 0;
  return static_cast<unsigned>(std::min<std::size_t>(shards, n));
}

}  // namespace lar::detail
