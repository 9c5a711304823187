#pragma once

// Minimal fork-join helpers. Work is split into contiguous index blocks and
// every task writes only its own output slot, so results never depend on the
// number of workers or on scheduling.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace collab {

namespace detail {
inline std::atomic<unsigned>& thread_cap() {
    static std::atomic<unsigned> cap{0};
    return cap;
}

// Set on worker threads so nested parallel_for calls run inline.
inline thread_local bool in_worker = false;
}  // namespace detail

// 0 means "use hardware concurrency".
inline void set_max_threads(unsigned n) { detail::thread_cap().store(n); }

inline unsigned max_threads() {
    const unsigned cap = detail::thread_cap().load();
    if (cap != 0) return cap;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Calls body(i) for i in [0, count). The first exception thrown by any task is
// rethrown on the calling thread after all workers join.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
    if (count == 0) return;
    const std::size_t workers = std::min<std::size_t>(max_threads(), count);
    if (workers <= 1 || detail::in_worker) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        const bool was_worker = detail::in_worker;
        detail::in_worker = true;
        struct Restore {
            bool value;
            ~Restore() { detail::in_worker = value; }
        } restore{was_worker};
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
    run();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// Evaluates f(i) for every index and returns the results in index order.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F&& f) {
    std::vector<T> out(count);
    parallel_for(count, [&](std::size_t i) { out[i] = f(i); });
    return out;
}

}  // namespace collab
