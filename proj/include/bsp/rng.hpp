#pragma once

#include <cmath>
#include <cstdint>

namespace bsp {

// Deterministic splitmix64 stream. Used instead of <random> so that sampled
// values are identical across standard libraries and build modes.
struct Rng {
    uint64_t state;

    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [lo, hi] inclusive
    int uniform_int(int lo, int hi) {
        return lo + int(next_u64() % uint64_t(hi - lo + 1));
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // standard normal, Box-Muller
    double normal() {
        double u1 = unit(), u2 = unit();
        while (u1 <= 1e-300) u1 = unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
};

// Independent stream for a (seed, index) pair; lets datasets be generated
// per-shape in any order.
inline uint64_t substream(uint64_t seed, uint64_t index) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    return r.next_u64();
}

} // namespace bsp
