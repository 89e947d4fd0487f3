#pragma once

#include <cmath>
#include <cstdint>

namespace dr {

// Deterministic, platform-independent PRNG (splitmix64 core). std:: engines
// are portable but the std:: distributions are not; we need bit-identical
// streams across compilers, so sampling is hand-rolled.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Unbiased via rejection.
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        uint64_t limit = ~uint64_t(0) - (~uint64_t(0) % n);
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller; second deviate cached.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    // Derives an independent stream; used to give workers/shards their own RNG.
    Rng fork(uint64_t stream_id) {
        uint64_t mixed = state_ ^ (0xA0761D6478BD642Full * (stream_id + 1));
        Rng child(mixed);
        child.next_u64();
        return child;
    }

private:
    uint64_t state_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

// Stateless mix of several seeds into one; handy for (seed, shard, step) keys.
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c = 0) {
    uint64_t z = a;
    z ^= b + 0x9E3779B97F4A7C15ull + (z << 6) + (z >> 2);
    z ^= c + 0x9E3779B97F4A7C15ull + (z << 6) + (z >> 2);
    return z;
}

} // namespace dr
