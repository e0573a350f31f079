#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace cornerflow {

/// Compensated accumulator built on the error-free TwoSum transformation.
struct CompensatedSum {
    double sum = 0.0;
    double err = 0.0;

    void add(double x) {
        double s = sum + x;
        double bp = s - sum;
        err += (sum - (s - bp)) + (x - bp);
        sum = s;
    }
    double value() const { return sum + err; }
};

struct CompensatedComplexSum {
    CompensatedSum re, im;
    void add(std::complex<double> z) {
        re.add(z.real());
        im.add(z.imag());
    }
    std::complex<double> value() const { return {re.value(), im.value()}; }
};

inline constexpr const char* threads_env_var = "CORNERFLOW_THREADS";

/// Worker count: explicit request, else the environment variable, else the hardware.
inline unsigned resolve_threads(unsigned requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv(threads_env_var)) {
        int n = std::atoi(env);
        if (n > 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, n). Each index is owned by exactly one worker, so
/// results never depend on the worker count.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    unsigned nt = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
    if (nt <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nt);
    std::size_t chunk = (n + nt - 1) / nt;
    for (unsigned t = 0; t < nt; ++t) {
        pool.emplace_back([&, t] {
            try {
                std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) body(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline constexpr std::size_t default_block = 256;

/// Sum with a fixed two-level tree: compensated sums over fixed-size blocks,
/// then a compensated sum of the block partials in block order.
inline double deterministic_sum(std::span<const double> xs, unsigned threads = 1,
                                std::size_t block = default_block) {
    std::size_t nb = (xs.size() + block - 1) / block;
    std::vector<double> partial(nb, 0.0);
    parallel_for(nb, threads, [&](std::size_t b) {
        CompensatedSum s;
        std::size_t hi = std::min(xs.size(), (b + 1) * block);
        for (std::size_t i = b * block; i < hi; ++i) s.add(xs[i]);
        partial[b] = s.value();
    });
    CompensatedSum total;
    for (double p : partial) total.add(p);
    return total.value();
}

}  // namespace cornerflow
