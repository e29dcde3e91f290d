// Per-passage parallel loops with index-ordered results.

#pragma once

#include <cstddef>
#include <functional>

namespace ucca {

/// UCCA_THREADS when set to a positive integer, otherwise 1.
int default_threads();

/// Runs body(0..n-1) on up to `threads` workers. Each index runs exactly
/// once; the first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace ucca
