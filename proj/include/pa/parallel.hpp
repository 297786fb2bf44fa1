#ifndef PA_PARALLEL_HPP
#define PA_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace pa {

/// Worker cap: PA_THREADS if set and positive, otherwise hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, count) over contiguous static chunks. Each index is
/// visited by exactly one worker, so per-index results do not depend on the
/// worker count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace pa

#endif  // PA_PARALLEL_HPP
