#ifndef INLA_PARALLEL_HPP
#define INLA_PARALLEL_HPP

#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace inla {

/// Static-chunked parallel loop over [0, n). Results must be written to
/// preallocated slots so the outcome is independent of the thread count.
/// The first exception thrown by any worker is rethrown on the caller.
inline void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    threads = std::min(threads, n);
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::atomic<int> next{0};
    std::mutex emu;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(emu);
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace inla

#endif
