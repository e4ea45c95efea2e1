#pragma once
// Counter-based splittable RNG and the samplers used by the simulators.
//
// SplitMix64 is a Weyl sequence through a 64-bit finalizer, so a stream is a
// pure function of (key, draw index): derived per-pixel keys give independent,
// reproducible substreams no matter how work is scheduled across threads.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ipspad {

/// SplitMix64 finalizer (Vigna's constants).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ull;

class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t key) : state_(key) {}

    std::uint64_t next() {
        state_ += golden_gamma;
        return mix64(state_);
    }

    /// Uniform double in [0, 1), 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log argument.
    double uniform01_open() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

  private:
    std::uint64_t state_;
};

/// Derive an independent stream key from a master seed and one index.
constexpr std::uint64_t derive_key(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master + golden_gamma) ^ (golden_gamma * (index + 1)));
}

/// Two-index variant (e.g. sweep point x trial).
constexpr std::uint64_t derive_key(std::uint64_t master, std::uint64_t a,
                                   std::uint64_t b) {
    return mix64(derive_key(master, a) ^ (0xC2B2AE3D27D4EB4Full * (b + 1)));
}

inline double sample_exponential(SplitMix64& rng, double rate) {
    return -std::log(rng.uniform01_open()) / rate;
}

/// Box-Muller. Draws two uniforms per call; no cached second value so the
/// draw count per call is fixed.
inline double sample_gaussian(SplitMix64& rng, double sigma) {
    const double u1 = rng.uniform01_open();
    const double u2 = rng.uniform01();
    return sigma * std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

/// Poisson sampler: product-of-uniforms for small means, rounded Gaussian
/// for large means (exact first two moments, error O(1/sqrt(mean))).
inline std::int64_t sample_poisson(SplitMix64& rng, double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
        const double limit = std::exp(-mean);
        std::int64_t k = 0;
        double p = rng.uniform01_open();
        while (p > limit) {
            ++k;
            p *= rng.uniform01_open();
        }
        return k;
    }
    const double g = sample_gaussian(rng, 1.0);
    const double v = std::round(mean + std::sqrt(mean) * g);
    return v < 0.0 ? 0 : static_cast<std::int64_t>(v);
}

}  // namespace ipspad
