#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lesionforge {

// splitmix64 finalizer. This is the project-wide seed-splitting rule:
// the seed of item i under master seed m is derive_seed(m, i). Every
// per-sample / per-variant / per-fold stream is derived this way so that
// parallel generation stays reproducible.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    return mix64(master ^ mix64(index));
}

// Deterministic RNG. Engine is mt19937_64 (bit-exact across platforms);
// the distributions are hand-rolled here because the std:: distribution
// algorithms are implementation-defined.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(mix64(seed)) {}

    uint64_t next_u64() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive [lo, hi], unbiased via rejection
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t n = static_cast<uint64_t>(hi - lo) + 1;
        if (n == 0) return lo + static_cast<int64_t>(next_u64());  // full range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return lo + static_cast<int64_t>(x % n);
    }

    // standard normal, Box-Muller with cached spare
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lesionforge
