#ifndef FEDHUNTER_PARALLEL_HPP
#define FEDHUNTER_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace fedhunter {

// Worker cap from FEDHUNTER_THREADS (0 or unset = hardware concurrency).
size_t worker_count();

// Runs fn(i) for i in [0,n). Results must be written to index-addressed
// slots by the caller; chunk scheduling never changes what gets computed,
// so output is identical for any thread count.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace fedhunter

#endif
