#include "qnls/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace qnls {

namespace {
std::atomic<int> g_threads{0};

int env_threads() {
    const char* s = std::getenv("QNLS_THREADS");
    if (!s || !*s) return 0;
    try {
        return std::max(1, std::stoi(s));
    } catch (...) {
        return 0;
    }
}
} // namespace

void set_thread_count(int n) { g_threads = std::max(1, n); }

int thread_count() {
    if (int e = env_threads(); e > 0) return e;
    int t = g_threads.load();
    return t > 0 ? t : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace qnls
