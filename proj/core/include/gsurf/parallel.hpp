#pragma once

#include <cstddef>
#include <functional>

namespace gsurf {

// Global worker cap. 0 = hardware concurrency. Applies to all parallel loops.
void set_max_threads(int n);
int max_threads();

// Runs fn(chunk_index) for chunk_index in [0, n_chunks), possibly in parallel.
// Chunks are independent; any gradient-style reduction must happen after the
// loop, in chunk order, so results are bit-identical for any thread count.
void parallel_chunks(std::size_t n_chunks, const std::function<void(std::size_t)>& fn);

// Convenience: splits [0, n) into chunks of at most chunk_size, runs
// fn(begin, end, chunk_index).
void parallel_ranges(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

std::size_t num_range_chunks(std::size_t n, std::size_t chunk_size);

}  // namespace gsurf
