#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lenslab {

// Deterministic seeded generator. mt19937_64 state transitions are fixed by
// the standard, and all draw helpers below avoid std::*_distribution (whose
// outputs are implementation-defined), so equal seeds give equal draw
// sequences on every platform.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : seed_(seed), engine_(seed) {}

    uint64_t seed() const { return seed_; }

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    uint64_t uniform_int(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Standard normal via Box-Muller. Consumes two draws per call; the
    // second value is not cached so the draw sequence stays stateless.
    double normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Stable sub-seed derivation (splitmix64 over the mixed-in words).
    // Used to hand independent streams to e.g. each sweep cell.
    static uint64_t derive(uint64_t base, uint64_t a, uint64_t b = 0) {
        uint64_t z = base;
        z = mix(z + 0x9e3779b97f4a7c15ULL + a);
        z = mix(z + 0x9e3779b97f4a7c15ULL + b);
        return z;
    }

private:
    static uint64_t mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t seed_;
    std::mt19937_64 engine_;
};

} // namespace lenslab
