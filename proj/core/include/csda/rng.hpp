#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace csda {

// All randomness in the toolkit funnels through one of these, seeded either
// directly or via derive_seed(). Sub-streams (per sample, per camera, per
// augmentation draw) are obtained by mixing tag words into the parent seed
// with splitmix64, so a run is reproducible from a single top-level seed and
// independent of scheduling order.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Seed-splitting rule: fold each tag into the running seed through one
// splitmix64 round. derive_seed(s, a, b) != derive_seed(s, b, a).
inline std::uint64_t derive_seed(std::uint64_t seed) { return splitmix64(seed); }

template <class... Tags>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, Tags... rest) {
    return derive_seed(splitmix64(seed ^ tag), rest...);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with 53 random bits; avoids the unspecified behaviour
    // of std::uniform_real_distribution so streams are portable.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free modulo is biased for huge n; n here is always tiny
        // compared to 2^64, so scale the 53-bit uniform instead.
        auto idx = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
        return idx >= n ? n - 1 : idx;
    }

    // Standard normal via Box-Muller (no cached spare: keeps the stream
    // position a pure function of the number of calls).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace csda
