// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace claimcheck {

// Evaluates fn(i) for i in [0, n) with at most `max_inflight` concurrent
// calls. Results land in index order regardless of completion order. The
// first exception thrown by any call is rethrown after all workers stop.
template <typename Fn>
auto ordered_parallel_map(std::size_t n, std::size_t max_inflight, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
  using Result = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<Result> results(n);
  if (n == 0) return results;
  const std::size_t workers = std::clamp<std::size_t>(max_inflight, 1, n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (!failed.load()) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n) return;
          try {
            results[i] = fn(i);
          } catch (...) {
            std::lock_guard lock(error_mu);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace claimcheck
