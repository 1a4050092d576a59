#include "fedhunter/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <thread>
#include <vector>

namespace fedhunter {

size_t worker_count() {
    size_t cap = 0;
    if (const char* env = std::getenv("FEDHUNTER_THREADS")) {
        cap = static_cast<size_t>(std::strtoul(env, nullptr, 10));
    }
    const size_t hw = std::max<size_t>(1, std::thread::hardware_concurrency());
    return cap == 0 ? hw : std::min(cap, hw);
}

void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    const size_t workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::atomic<bool> failed{false};
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failed.load()) {
        throw std::runtime_error("parallel_for: worker task failed");
    }
}

}  // namespace fedhunter
