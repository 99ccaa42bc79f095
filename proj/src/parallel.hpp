#ifndef STFE_PARALLEL_HPP
#define STFE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace stfe::detail {

/// Runs body(0..count-1) on up to `threads` workers. The first exception is
/// rethrown after all workers finish.
template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& body)
{
    threads = std::max(1u, static_cast<unsigned>(std::min<std::size_t>(threads, count)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

} // namespace stfe::detail

#endif // STFE_PARALLEL_HPP
