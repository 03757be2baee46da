#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace visyn {

// Sentinel for forbidden assignments. Anything at or above kInfCost/2 is
// treated as infinite; sums saturate instead of overflowing.
inline constexpr double kInfCost = 1e30;

inline bool is_inf_cost(double v) { return v >= kInfCost * 0.5; }

inline double sat_add(double a, double b) {
    if (is_inf_cost(a) || is_inf_cost(b)) return kInfCost;
    return a + b;
}

// Finite stand-in for kInfCost where costs must enter exact arithmetic
// (cut-graph capacities, move acceptance). Dominates any sum of admissible
// costs while a few thousand of them still add without precision loss.
inline constexpr double kBigCost = 1e12;

inline double clamp_cost(double v) { return v > kBigCost ? kBigCost : v; }

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or truncated file. `offset` is the byte position for binary
// formats, -1 when not applicable.
class FormatError : public Error {
public:
    FormatError(const std::string& msg, std::int64_t offset = -1)
        : Error(offset >= 0 ? msg + " (byte offset " + std::to_string(offset) + ")" : msg),
          offset_(offset) {}
    std::int64_t offset() const { return offset_; }

private:
    std::int64_t offset_;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

class DegenerateError : public Error {
public:
    using Error::Error;
};

class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& msg, double residual)
        : Error(msg + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

// splitmix64: deterministic across platforms, unlike <random> distributions.
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + int(next_u64() % std::uint64_t(hi - lo + 1));
    }

    double normal() {
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Rng fork() { return Rng(next_u64()); }
};

// Runs body(begin, end) over disjoint chunks of [0, n). Callers write to
// disjoint output slots, so results are independent of scheduling. The first
// worker exception is rethrown after the join.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    if (threads <= 1 || n == 1) {
        body(0, n);
        return;
    }
    std::size_t workers = std::min<std::size_t>(std::size_t(threads), n);
    std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, lo, hi] {
            try {
                body(lo, hi);
            } catch (...) {
                std::lock_guard<std::mutex> guard(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace visyn
