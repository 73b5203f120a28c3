// SPDX-License-Identifier: MIT
#include "twoscale/common.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace twoscale {

namespace {
std::atomic<std::size_t> g_threads{0};
}

double joint_ci(double a, double b) { return std::sqrt(a * a + b * b); }

Estimate mean_ci(const std::vector<double>& samples) {
    Estimate e;
    if (samples.empty()) return e;
    const double n = static_cast<double>(samples.size());
    double sum = 0.0;
    for (double s : samples) sum += s;
    e.value = sum / n;
    if (samples.size() > 1) {
        double ss = 0.0;
        for (double s : samples) ss += (s - e.value) * (s - e.value);
        e.ci = 1.96 * std::sqrt(ss / (n - 1.0) / n);
    }
    return e;
}

std::size_t worker_threads() {
    std::size_t n = g_threads.load();
    if (n == 0) {
        if (const char* env = std::getenv("TWOSCALE_THREADS")) n = std::strtoul(env, nullptr, 10);
        if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
        g_threads.store(n);
    }
    return n;
}

void set_worker_threads(std::size_t n) { g_threads.store(std::max<std::size_t>(1, n)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
    const std::size_t workers = std::min(worker_threads(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                const std::size_t lo = w * chunk;
                const std::size_t hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 finalizer over the combined words
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace twoscale
