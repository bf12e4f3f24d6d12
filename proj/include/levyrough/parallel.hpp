#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace levyrough {

std::uint64_t splitmix64(std::uint64_t x);
// Seed of stream `index` derived from `master`; counter-based, so any worker may draw it.
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

// Evaluates f(0..n_blocks-1) on `jobs` threads; results come back in block order.
template <class Acc, class F>
std::vector<Acc> run_blocks(std::size_t n_blocks, int jobs, F&& f) {
    std::vector<Acc> out(n_blocks);
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs < 1 ? 1 : jobs, n_blocks));
    if (workers <= 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) out[b] = f(b);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto work = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            try {
                out[b] = f(b);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
                next = n_blocks;
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    return out;
}

template <class T>
T pairwise_sum(std::vector<T> v) {
    if (v.empty()) return T{};
    while (v.size() > 1) {
        std::vector<T> next;
        next.reserve((v.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < v.size(); i += 2) next.push_back(v[i] + v[i + 1]);
        if (v.size() % 2) next.push_back(std::move(v.back()));
        v = std::move(next);
    }
    return std::move(v.front());
}

} // namespace levyrough
