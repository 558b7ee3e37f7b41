#include "kel/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace kel {

int thread_count() {
    if (const char* env = std::getenv("KEL_THREADS")) {
        int t = std::atoi(env);
        if (t >= 1) return t;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    int T = thread_count();
    if (T <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int spawn = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(T), n));
    pool.reserve(static_cast<size_t>(spawn));
    for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

double tree_sum(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    while (xs.size() > 1) {
        std::size_t half = (xs.size() + 1) / 2;
        for (std::size_t i = 0; i + half < xs.size(); ++i) xs[i] += xs[i + half];
        xs.resize(half);
    }
    return xs[0];
}

}  // namespace kel
