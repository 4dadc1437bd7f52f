// Copyright Contributors to the Lumos Project
// SPDX-License-Identifier: Apache-2.0

#include <lumos/parallel.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lumos {

namespace {

std::atomic<int> g_thread_cap{0};

int effective_threads() {
    const int cap = g_thread_cap.load(std::memory_order_relaxed);
    if (cap > 0) {
        return cap;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace

void set_thread_count(int n) { g_thread_cap.store(n < 0 ? 0 : n, std::memory_order_relaxed); }

int thread_count() { return effective_threads(); }

int plan_chunks(std::size_t n) {
    if (n == 0) {
        return 0;
    }
    return static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(effective_threads())));
}

void parallel_for_chunks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t, int)>& fn) {
    const int nchunks = plan_chunks(n);
    if (nchunks == 0) {
        return;
    }
    if (nchunks == 1) {
        fn(0, n, 0);
        return;
    }

    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(nchunks));

    const std::size_t base = n / static_cast<std::size_t>(nchunks);
    const std::size_t rem = n % static_cast<std::size_t>(nchunks);
    std::size_t begin = 0;
    for (int c = 0; c < nchunks; ++c) {
        const std::size_t len = base + (static_cast<std::size_t>(c) < rem ? 1 : 0);
        const std::size_t end = begin + len;
        workers.emplace_back([&, begin, end, c]() {
            try {
                fn(begin, end, c);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        });
        begin = end;
    }
    for (std::thread& t : workers) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

} // namespace lumos
