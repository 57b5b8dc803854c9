// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace vpiqa {

/// Runs fn(i) for i in [0, n) on up to `workers` threads using contiguous
/// chunks. If several calls throw, the exception from the lowest index is
/// rethrown, so failures are reported deterministically.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nthreads = std::min<std::size_t>(workers, n);
  std::vector<std::exception_ptr> errors(nthreads);
  std::vector<std::size_t> failed_at(nthreads, n);
  {
    std::vector<std::jthread> threads;
    threads.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
      threads.emplace_back([&, t] {
        const std::size_t begin = n * t / nthreads;
        const std::size_t end = n * (t + 1) / nthreads;
        for (std::size_t i = begin; i < end; ++i) {
          try {
            fn(i);
          } catch (...) {
            errors[t] = std::current_exception();
            failed_at[t] = i;
            return;
          }
        }
      });
    }
  }
  for (std::size_t t = 0; t < nthreads; ++t)
    if (errors[t]) std::rethrow_exception(errors[t]);
}

}  // namespace vpiqa
