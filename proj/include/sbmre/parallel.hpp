#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sbmre {

// Runs fn(replica_index) for replica_index in [0, count) across `workers`
// threads. Work is strided by replica index; each replica derives its own
// RNG stream, so the partition affects wall time only. Callers store
// per-replica results by index and reduce sequentially, which keeps every
// reported statistic byte-identical across worker counts.
template <typename Fn>
void parallel_replicas(std::size_t count, unsigned workers, Fn fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t r = 0; r < count; ++r) fn(r);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mu);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace sbmre
