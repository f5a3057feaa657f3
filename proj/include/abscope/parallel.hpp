#pragma once

#include <cstddef>
#include <functional>

namespace abscope {

/// Resolves a worker count: a positive request wins, otherwise the
/// ABSCOPE_THREADS environment variable, otherwise hardware concurrency.
int resolve_thread_count(int requested);

/// Calls fn(i) for every i in [0, count) on up to `threads` workers. Work items
/// must be independent; the first exception thrown is rethrown on the caller.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace abscope
