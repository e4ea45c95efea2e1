#pragma once
// Flux estimators for dead-time limited photon timestamp streams, plus the
// dead-time calibration and histogram utilities that support them.
//
// All estimators take the dead time as an explicit parameter so a calibrated
// per-pixel value can be injected in place of the configured one.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "ipspad/core.hpp"

namespace ipspad {

/// Denominator floor: half a quantization bin when timestamps are quantized
/// (caps the estimate at the resolution limit instead of producing infinity),
/// otherwise a 1 fs guard against exact cancellation.
inline double default_denominator_floor(double time_quantization) {
    return time_quantization > 0.0 ? 0.5 * time_quantization : 1e-15;
}

/// First/last-timestamp flux estimator:
///   flux = (1/q) * (N-1) / (X_N - X_1 - (N-1)*dead_time)
/// computed from recorded timestamps. Intermediate timestamps feed only
/// calibration and histograms.
inline FluxEstimate ipspad_mle(const PhotonStream& s, double q, double dead_time) {
    const std::int64_t n = s.size();
    if (n < 2) throw InsufficientPhotons("ipspad_mle: need >= 2 detections");
    const double raw = s.recorded.back() - s.recorded.front() -
                       static_cast<double>(n - 1) * dead_time;
    const double floor_s = default_denominator_floor(s.config.time_quantization);

    FluxEstimate e;
    e.kind = EstimatorKind::IpSpadMle;
    e.n_detections = n;
    e.darkness_total = std::max(raw, 0.0);
    e.denominator_clamped = raw < floor_s;
    const double denom = e.denominator_clamped ? floor_s : raw;
    e.flux = static_cast<double>(n - 1) / (q * denom);
    return e;
}

/// Full conditional MLE:
///   flux = N / (q * max(sum Y_i, T - N*dead_time))
/// where the Y_i are the first wait plus the inter-photon times-of-darkness
/// computed with the supplied dead time. The max-term selects the total armed
/// time depending on whether the final dead time crosses the end of exposure.
inline FluxEstimate ipspad_full_mle(const PhotonStream& s, double q, double dead_time,
                                    double exposure) {
    const std::int64_t n = s.size();
    if (n < 1) throw InsufficientPhotons("ipspad_full_mle: need >= 1 detection");
    double darkness = s.recorded.front();
    for (double y : interphoton_times(s, dead_time)) darkness += y;
    const double armed = std::max(darkness, exposure - static_cast<double>(n) * dead_time);
    const double floor_s = default_denominator_floor(s.config.time_quantization);

    FluxEstimate e;
    e.kind = EstimatorKind::IpSpadFullMle;
    e.n_detections = n;
    e.darkness_total = std::max(armed, 0.0);
    e.denominator_clamped = armed < floor_s;
    e.flux = static_cast<double>(n) / (q * (e.denominator_clamped ? floor_s : armed));
    return e;
}

/// Counts-only baseline, the inversion of E[N] for the renewal process:
///   flux = N / (q * (T + dead_time - N*dead_time)).
inline FluxEstimate pfspad_counts(std::int64_t n, double q, double dead_time,
                                  double exposure) {
    if (n < 0) throw CountOutOfRange("pfspad_counts: negative count");
    const double r = exposure / dead_time;
    const auto cap = static_cast<std::int64_t>(std::ceil(r * (1.0 - 1e-12)));
    if (n > cap) throw CountOutOfRange("pfspad_counts: count exceeds ceil(T/dead_time)");

    FluxEstimate e;
    e.kind = EstimatorKind::PfSpadCounts;
    e.n_detections = n;
    const double denom = exposure + dead_time - static_cast<double>(n) * dead_time;
    e.darkness_total = std::max(denom, 0.0);
    if (n == 0) return e;
    if (denom <= 0.0) {
        e.flux = std::numeric_limits<double>::infinity();
        e.saturated = true;
        return e;
    }
    e.flux = static_cast<double>(n) / (q * denom);
    return e;
}

/// Variable-exposure first-photon estimator: flux = 1 / (q * y1).
inline FluxEstimate first_photon_estimate(double y1, double q) {
    if (!(y1 > 0.0)) throw InvalidTimestamp("first_photon_estimate: wait must be > 0");
    FluxEstimate e;
    e.kind = EstimatorKind::FirstPhoton;
    e.n_detections = 1;
    e.darkness_total = y1;
    e.flux = 1.0 / (q * y1);
    return e;
}

/// Remove the constant bias of a mean log first-photon timestamp:
/// E[log Y] = -log(flux) - gamma, so the debiased value estimates -log(flux).
inline double log_timestamp_debias(double log_estimate) {
    return log_estimate + euler_gamma;
}

enum class RiseShape { Step, LinearRamp };

/// Efficiency profile q(t) after a dead time, with a closed-form integral.
struct RiseProfile {
    double t_rise = 0.0;
    RiseShape shape = RiseShape::Step;
    double plateau_q = 1.0;

    /// Integral of q(t) over [0, x]; units of q * seconds.
    [[nodiscard]] double integral(double x) const {
        if (x <= 0.0) return 0.0;
        if (shape == RiseShape::Step || t_rise <= 0.0) return plateau_q * x;
        if (x < t_rise) return plateau_q * x * x / (2.0 * t_rise);
        return plateau_q * (x - 0.5 * t_rise);
    }
};

/// MLE under time-varying quantum efficiency:
///   flux = N / ( I(final wait) + sum_i I(Y_i) ),  I(x) = integral of q(t).
/// A step profile reduces exactly to the full MLE; that reduction is shared
/// code so the two agree bit for bit.
inline FluxEstimate risetime_corrected_mle(const PhotonStream& s,
                                           const RiseProfile& profile,
                                           double dead_time, double exposure) {
    const std::int64_t n = s.size();
    if (n < 1) throw InsufficientPhotons("risetime_corrected_mle: need >= 1 detection");
    if (profile.shape == RiseShape::Step || profile.t_rise <= 0.0) {
        FluxEstimate e = ipspad_full_mle(s, profile.plateau_q, dead_time, exposure);
        e.kind = EstimatorKind::RiseTimeCorrectedMle;
        return e;
    }

    double darkness = s.recorded.front();
    double integral = profile.integral(s.recorded.front());
    for (double y : interphoton_times(s, dead_time)) {
        darkness += y;
        integral += profile.integral(y);
    }
    const double final_wait =
        std::max(0.0, exposure - static_cast<double>(n) * dead_time - darkness);
    integral += profile.integral(final_wait);

    const double floor_s = profile.plateau_q *
                           default_denominator_floor(s.config.time_quantization);
    FluxEstimate e;
    e.kind = EstimatorKind::RiseTimeCorrectedMle;
    e.n_detections = n;
    e.darkness_total = integral / profile.plateau_q;
    e.denominator_clamped = integral < floor_s;
    e.flux = static_cast<double>(n) / (e.denominator_clamped ? floor_s : integral);
    return e;
}

/// Linear inversion of a conventional reading, dark-subtracted:
///   flux = (reading - dark*T) / (q*T), +inf sentinel at hard saturation.
inline FluxEstimate conventional_linear(std::int64_t reading,
                                        const ConventionalConfig& cfg) {
    FluxEstimate e;
    e.kind = EstimatorKind::ConventionalLinear;
    e.n_detections = reading;
    e.darkness_total = 0.0;
    if (reading >= cfg.full_well_capacity) {
        e.flux = std::numeric_limits<double>::infinity();
        e.saturated = true;
        return e;
    }
    const double signal =
        static_cast<double>(reading) - cfg.dark_rate * cfg.exposure_time;
    e.flux = std::max(signal, 0.0) / (cfg.quantum_efficiency * cfg.exposure_time);
    return e;
}

/// Dead-time estimate from the inter-photon interval histogram: the left edge
/// of the first non-empty bin of the raw (not dead-time-subtracted) interval
/// histogram, over all supplied streams.
inline double calibrate_dead_time(std::span<const PhotonStream> streams,
                                  double bin_width) {
    if (!(bin_width > 0.0)) throw DomainError("calibrate_dead_time: bin_width must be > 0");
    double min_diff = std::numeric_limits<double>::infinity();
    for (const PhotonStream& s : streams)
        for (std::size_t i = 0; i + 1 < s.recorded.size(); ++i)
            min_diff = std::min(min_diff, s.recorded[i + 1] - s.recorded[i]);
    if (!std::isfinite(min_diff))
        throw InsufficientPhotons("calibrate_dead_time: no inter-photon interval available");
    return std::max(0.0, std::floor(min_diff / bin_width)) * bin_width;
}

/// Histogram of raw inter-detection intervals over [0, max_time), with an
/// overflow bucket for larger intervals.
struct Histogram {
    double bin_width = 0.0;
    std::vector<std::uint64_t> counts;
    std::uint64_t overflow = 0;

    [[nodiscard]] double bin_left(std::size_t i) const { return bin_width * static_cast<double>(i); }
    [[nodiscard]] double bin_right(std::size_t i) const { return bin_width * static_cast<double>(i + 1); }
    [[nodiscard]] std::uint64_t total() const {
        std::uint64_t t = overflow;
        for (auto c : counts) t += c;
        return t;
    }
};

inline Histogram interphoton_histogram(const PhotonStream& s, double bin_width,
                                       double max_time) {
    if (!(bin_width > 0.0)) throw DomainError("interphoton_histogram: bin_width must be > 0");
    Histogram h;
    h.bin_width = bin_width;
    h.counts.assign(static_cast<std::size_t>(std::ceil(max_time / bin_width)), 0);
    for (std::size_t i = 0; i + 1 < s.recorded.size(); ++i) {
        const double diff = s.recorded[i + 1] - s.recorded[i];
        if (diff >= max_time) {
            ++h.overflow;
            continue;
        }
        const auto bin = static_cast<std::size_t>(std::floor(std::max(diff, 0.0) / bin_width));
        ++h.counts[std::min(bin, h.counts.size() - 1)];
    }
    return h;
}

}  // namespace ipspad
