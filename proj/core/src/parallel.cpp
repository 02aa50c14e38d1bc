#include "gsurf/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <thread>

namespace gsurf {

namespace {
int g_max_threads = 0;  // 0 = auto
}

void set_max_threads(int n) { g_max_threads = n < 0 ? 0 : n; }

int max_threads() {
  if (g_max_threads > 0) return g_max_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_chunks(std::size_t n_chunks, const std::function<void(std::size_t)>& fn) {
  if (n_chunks == 0) return;
  const int threads = std::min<std::size_t>(n_chunks, static_cast<std::size_t>(max_threads()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n_chunks; ++i) fn(i);
    return;
  }
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long long i = 0; i < static_cast<long long>(n_chunks); ++i) {
    fn(static_cast<std::size_t>(i));
  }
}

std::size_t num_range_chunks(std::size_t n, std::size_t chunk_size) {
  if (chunk_size == 0) chunk_size = 1;
  return (n + chunk_size - 1) / chunk_size;
}

void parallel_ranges(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t chunks = num_range_chunks(n, chunk_size);
  parallel_chunks(chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(n, begin + chunk_size);
    fn(begin, end, c);
  });
}

}  // namespace gsurf
