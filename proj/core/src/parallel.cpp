#include "n2f/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace n2f {

namespace {
    std::atomic<std::size_t> g_thread_count{0};
}

void set_thread_count(std::size_t n) { g_thread_count.store(n); }

std::size_t thread_count() {
    const std::size_t n = g_thread_count.load();
    if (n > 0)
        return n;
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t begin, std::size_t end, const std::function<void(std::size_t)>& fn) {
    if (end <= begin)
        return;
    const std::size_t count = end - begin;
    const std::size_t workers = std::min(thread_count(), count);
    if (workers <= 1) {
        for (std::size_t i = begin; i < end; ++i)
            fn(i);
        return;
    }

    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto run_block = [&](std::size_t w) {
        const std::size_t lo = begin + count * w / workers;
        const std::size_t hi = begin + count * (w + 1) / workers;
        try {
            for (std::size_t i = lo; i < hi; ++i)
                fn(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error)
                first_error = std::current_exception();
        }
    };

    {
        std::vector<std::jthread> threads;
        threads.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w)
            threads.emplace_back(run_block, w);
        run_block(0);
    }
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace n2f
