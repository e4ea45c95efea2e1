#pragma once
// Statistically exact photon-detection stream simulation for a dead-time
// limited single-photon pixel, plus the conventional well-filling baseline.
//
// The detection process is sequential: from each armed instant the next
// time-of-darkness is exponential with the merged rate q*flux + dark_rate;
// detections inside the efficiency ramp are thinned (exact for an
// inhomogeneous Poisson process). The dead-time clock runs on true times;
// jitter and quantization only affect what gets recorded.

#include <algorithm>
#include <cstdint>

#include "ipspad/core.hpp"
#include "ipspad/rng.hpp"

namespace ipspad {

/// Identifies one deterministic simulation substream. Identical
/// (master_seed, pixel_index, config, flux) reproduce bit-identical streams.
struct SimSeed {
    std::uint64_t master_seed = 0;
    std::uint64_t pixel_index = 0;

    [[nodiscard]] std::uint64_t key() const { return derive_key(master_seed, pixel_index); }
};

/// Time-varying quantum efficiency q(t) measured from the end of the
/// preceding dead time: 0 before, a linear ramp to the plateau over
/// rise_time, the plateau q after. rise_time = 0 is an ideal step.
inline double rise_profile(double t_since_dead_time_end, const PixelConfig& cfg) {
    if (t_since_dead_time_end < 0.0) return 0.0;
    if (cfg.rise_time <= 0.0 || t_since_dead_time_end >= cfg.rise_time)
        return cfg.quantum_efficiency;
    return cfg.quantum_efficiency * t_since_dead_time_end / cfg.rise_time;
}

/// Simulate one exposure of a single-photon pixel observing constant flux.
inline PhotonStream simulate_stream(double flux, const PixelConfig& cfg, SimSeed seed) {
    if (flux < 0.0) throw DomainError("simulate_stream: flux must be >= 0");
    cfg.validate();

    PhotonStream s;
    s.exposure = cfg.exposure_time;
    s.config = cfg;

    SplitMix64 rng(seed.key());
    const double rate = cfg.quantum_efficiency * flux + cfg.dark_rate;
    if (rate <= 0.0) return s;

    const double T = cfg.exposure_time;
    const bool thinning = cfg.rise_time > 0.0;
    double arm_start = 0.0;  // pixel armed from t=0 and after each dead time
    std::int64_t k = 0;

    while (true) {
        // Next accepted arrival at/after arm_start. Candidates arrive at the
        // plateau rate; one is kept with probability q(offset)/q.
        double t = arm_start;
        bool detected = false;
        while (true) {
            t += sample_exponential(rng, rate);
            if (t >= T) break;  // later candidates are later still
            if (thinning) {
                const double accept =
                    rise_profile(t - arm_start, cfg) / cfg.quantum_efficiency;
                if (rng.uniform01() >= accept) continue;
            }
            detected = true;
            break;
        }
        if (!detected) break;

        const double dead = cfg.dead_time + cfg.drift_coefficient * static_cast<double>(k);
        s.detections.push_back(t);
        s.effective_dead_times.push_back(dead);
        ++k;
        arm_start = t + dead;
        if (arm_start >= T) break;
    }

    // What the electronics stored: jitter, restore order, floor-quantize.
    s.recorded = s.detections;
    if (cfg.timestamp_jitter_sigma > 0.0) {
        for (double& r : s.recorded)
            r += sample_gaussian(rng, cfg.timestamp_jitter_sigma);
        int inversions = 0;
        for (std::size_t i = 1; i < s.recorded.size(); ++i)
            if (s.recorded[i] < s.recorded[i - 1]) ++inversions;
        if (inversions > 0) {
            std::sort(s.recorded.begin(), s.recorded.end());
            s.jitter_reorder_count = inversions;
        }
    }
    if (cfg.time_quantization > 0.0) {
        const double delta = cfg.time_quantization;
        for (double& r : s.recorded) r = std::floor(r / delta) * delta;
    }
    return s;
}

/// One conventional-pixel reading in electrons:
/// min(FWC, Poisson((q*flux + dark)*T) + round(Gaussian(0, sigma_r))),
/// clamped to [0, FWC].
inline std::int64_t simulate_conventional(double flux, const ConventionalConfig& cfg,
                                          SimSeed seed) {
    if (flux < 0.0) throw DomainError("simulate_conventional: flux must be >= 0");
    cfg.validate();
    SplitMix64 rng(seed.key());
    const double mean_electrons =
        (cfg.quantum_efficiency * flux + cfg.dark_rate) * cfg.exposure_time;
    std::int64_t reading = sample_poisson(rng, mean_electrons);
    if (cfg.read_noise_sigma > 0.0)
        reading += std::llround(sample_gaussian(rng, cfg.read_noise_sigma));
    return std::clamp<std::int64_t>(reading, 0, cfg.full_well_capacity);
}

}  // namespace ipspad
