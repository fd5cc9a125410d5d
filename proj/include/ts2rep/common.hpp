#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#define TS2REP_VERSION_STRING "0.1.0"

namespace ts2rep {

// Shape/size mismatches between tensors or between data and model.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid argument values (bad dilation, empty input, rate out of range, ...).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed input files or inconsistent run configuration.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (diverged loss, bad probe point).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic RNG. All draws are derived from mt19937_64 output directly so
/// that sequences do not depend on the standard library's distribution
/// implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive. Rejection sampling, no modulo bias.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (lo > hi) throw ArgumentError("uniform_int: empty range");
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<int64_t>(gen_());  // full 64-bit range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return lo + static_cast<int64_t>(x % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        // Box-Muller; second value discarded to keep the stream simple.
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Independent stream derived from (seed, stream), e.g. one per training
    /// iteration, so batch prefetch order cannot change results.
    explicit Rng(uint64_t seed, uint64_t stream) : Rng(seed_mix(seed, stream)) {}

private:
    static uint64_t seed_mix(uint64_t a, uint64_t b) {
        uint64_t x = a + 0x9E3779B97F4A7C15ull * (b + 1);
        x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ull;
        x ^= x >> 27; x *= 0x94D049BB133111EBull;
        x ^= x >> 31;
        return x;
    }

    std::mt19937_64 gen_;
};

/// FNV-1a over a byte range; used for dataset fingerprints and golden hashes.
inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Worker-thread cap: TS2REP_THREADS if set, otherwise hardware concurrency.
inline unsigned max_threads() {
    if (const char* env = std::getenv("TS2REP_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Run fn(i) for i in [0, n). Only used where iterations write disjoint
/// outputs, so results are identical for any thread count.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    const unsigned nthreads = std::min<unsigned>(max_threads(), static_cast<unsigned>(std::max<int64_t>(n, 1)));
    if (nthreads <= 1 || n <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            for (int64_t i = t; i < n; i += nthreads) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace ts2rep
