#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sgmcmc
{

//! Worker count: SGMCMC_THREADS if set, otherwise the hardware concurrency.
inline unsigned default_thread_count()
{
    if (const char* env = std::getenv("SGMCMC_THREADS"))
    {
        int n = std::atoi(env);
        if (n > 0)
        {
            return static_cast<unsigned>(n);
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/*!
 * Runs body(i) for i in [0, count) over a small worker pool. Tasks write
 * results into slots keyed by i, so output does not depend on scheduling.
 * The first exception thrown by any task is rethrown.
 */
template<class Body>
void parallel_for(std::size_t count, Body&& body, unsigned threads = 0)
{
    if (threads == 0)
    {
        threads = default_thread_count();
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1)
    {
        for (std::size_t i = 0; i < count; ++i)
        {
            body(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (std::size_t i = next++; i < count; i = next++)
        {
            try
            {
                body(i);
            }
            catch (...)
            {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                {
                    failure = std::current_exception();
                }
                next = count;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t)
        {
            pool.emplace_back(worker);
        }
    }
    if (failure)
    {
        std::rethrow_exception(failure);
    }
}

} // namespace sgmcmc
