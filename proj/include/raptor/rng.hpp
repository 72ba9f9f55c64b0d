#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace raptor {

// 64-bit FNV-1a. Used for seed derivation and content fingerprints where
// cross-platform stability matters more than collision resistance.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 14695981039346656037ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// SplitMix64. Hand-rolled so that streams are identical across standard
// libraries; std::normal_distribution is not portable.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        return n == 0 ? 0 : next() % n;
    }

    // Standard normal via Box-Muller; draws two uniforms per call.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

private:
    std::uint64_t state_;
};

// Deterministically derive an independent seed for a named sub-stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view salt) {
    SplitMix64 mix(base ^ fnv1a64(salt));
    return mix.next();
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    SplitMix64 mix(base ^ (salt * 0x9e3779b97f4a7c15ull + 0x165667b19e3779f9ull));
    return mix.next();
}

}  // namespace raptor
