#include "gsa/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace gsa {

namespace {

std::size_t threads_from_env() {
    if (const char* env = std::getenv("GSA_THREADS")) {
        try {
            long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (...) {
        }
    }
    return 1;
}

std::atomic<std::size_t>& thread_cap() {
    static std::atomic<std::size_t> cap{threads_from_env()};
    return cap;
}

thread_local FlopCounter* active_counter = nullptr;

}  // namespace

void set_num_threads(std::size_t n) { thread_cap() = std::max<std::size_t>(1, n); }

std::size_t num_threads() { return thread_cap(); }

void parallel_for(std::size_t n, std::size_t min_chunk,
                  const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    std::size_t workers = std::min(num_threads(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
    if (workers <= 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        std::size_t b = w * chunk;
        std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    body(0, std::min(n, chunk));
    for (auto& t : pool) t.join();
}

FlopCounter::FlopCounter() : parent_(active_counter) { active_counter = this; }

FlopCounter::~FlopCounter() {
    active_counter = parent_;
    if (parent_) parent_->tally_ += tally_;
}

void FlopCounter::record_macs(std::uint64_t macs) {
    if (active_counter) {
        active_counter->tally_.mults += macs;
        active_counter->tally_.adds += macs;
    }
}

FlopPause::FlopPause() : saved_(active_counter) { active_counter = nullptr; }
FlopPause::~FlopPause() { active_counter = saved_; }

}  // namespace gsa
