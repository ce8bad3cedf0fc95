#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace lranker::detail {

/// Splits [0, n) into `workers` contiguous chunks and runs fn(chunk, begin, end)
/// for each, chunk 0 on the calling thread. Rethrows the first worker exception.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  auto run = [&](std::size_t c) {
    const std::size_t begin = n * c / workers;
    const std::size_t end = n * (c + 1) / workers;
    try {
      fn(c, begin, end);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t c = 1; c < workers; ++c) pool.emplace_back(run, c);
    run(0);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace lranker::detail
