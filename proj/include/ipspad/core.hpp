#pragma once
// Core domain types for passive single-photon (dead-time limited) flux
// estimation: pixel configurations, photon-detection streams, estimates,
// SNR curves and flux images, plus the invariants they must satisfy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ipspad {

/// Euler-Mascheroni constant: bias of the mean log first-photon timestamp.
inline constexpr double euler_gamma = 0.57721566490153286061;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
/// Estimator requires more detections than the stream contains.
struct InsufficientPhotons : std::runtime_error {
    using std::runtime_error::runtime_error;
};
/// Photon count exceeds the dead-time-limited maximum.
struct CountOutOfRange : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidTimestamp : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Pixel configurations
// ---------------------------------------------------------------------------

/// Physical and electronic parameters of one simulated single-photon pixel.
/// All times are in seconds, rates in events per second.
struct PixelConfig {
    double quantum_efficiency = 1.0;   ///< q, fraction in (0,1]
    double dead_time = 100e-9;         ///< blind interval after each detection
    double time_quantization = 0.0;    ///< timestamp bin size; 0 = continuous
    double exposure_time = 1e-3;       ///< fixed exposure T
    double dark_rate = 0.0;            ///< spurious detections per second
    double timestamp_jitter_sigma = 0.0;  ///< Gaussian timestamp noise (s)
    double rise_time = 0.0;            ///< efficiency ramp after dead time; 0 = step
    double drift_coefficient = 0.0;    ///< dead-time growth per prior detection (s)

    /// Hard cap on detections in one exposure: ceil(T / dead_time).
    /// The ratio is computed with a one-part-in-1e12 guard so exact integer
    /// ratios do not round up from floating-point noise.
    [[nodiscard]] std::int64_t max_detections() const {
        const double r = exposure_time / dead_time;
        return static_cast<std::int64_t>(std::ceil(r * (1.0 - 1e-12)));
    }

    void validate() const {
        if (!(quantum_efficiency > 0.0) || quantum_efficiency > 1.0)
            throw ConfigError("quantum_efficiency must be in (0,1]");
        if (!(dead_time > 0.0)) throw ConfigError("dead_time must be > 0");
        if (time_quantization < 0.0) throw ConfigError("time_quantization must be >= 0");
        if (!(exposure_time > 0.0)) throw ConfigError("exposure_time must be > 0");
        if (exposure_time <= dead_time)
            throw ConfigError("exposure_time must exceed dead_time");
        if (dark_rate < 0.0) throw ConfigError("dark_rate must be >= 0");
        if (timestamp_jitter_sigma < 0.0) throw ConfigError("jitter sigma must be >= 0");
        if (rise_time < 0.0) throw ConfigError("rise_time must be >= 0");
        if (drift_coefficient < 0.0) throw ConfigError("drift_coefficient must be >= 0");
    }
};

/// Well-filling sensor pixel used as the conventional baseline.
struct ConventionalConfig {
    std::int64_t full_well_capacity = 34000;  ///< electrons
    double read_noise_sigma = 5.0;            ///< electrons
    double quantum_efficiency = 1.0;
    double exposure_time = 5e-3;
    double dark_rate = 0.0;

    void validate() const {
        if (full_well_capacity < 1) throw ConfigError("full_well_capacity must be >= 1");
        if (read_noise_sigma < 0.0) throw ConfigError("read_noise_sigma must be >= 0");
        if (!(quantum_efficiency > 0.0) || quantum_efficiency > 1.0)
            throw ConfigError("quantum_efficiency must be in (0,1]");
        if (!(exposure_time > 0.0)) throw ConfigError("exposure_time must be > 0");
        if (dark_rate < 0.0) throw ConfigError("dark_rate must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Photon stream
// ---------------------------------------------------------------------------

/// One exposure's ordered photon detections.
///
/// `detections` are the true arrival times; `recorded` are what the timing
/// electronics stored (jittered, then floor-quantized). The dead-time clock
/// runs on true times only; quantization never feeds back into the process.
struct PhotonStream {
    std::vector<double> detections;   ///< strictly increasing, in [0, T)
    std::vector<double> recorded;     ///< same length, non-decreasing
    double exposure = 0.0;            ///< T
    PixelConfig config;               ///< snapshot of the producing pixel
    /// Dead time applied after each detection (captures drift).
    std::vector<double> effective_dead_times;
    /// Number of adjacent-pair inversions repaired by sorting after jitter.
    int jitter_reorder_count = 0;

    [[nodiscard]] std::int64_t size() const {
        return static_cast<std::int64_t>(recorded.size());
    }
};

/// Throws if a simulated stream violates its invariants (true-time checks).
inline void validate_stream(const PhotonStream& s) {
    const auto n = s.detections.size();
    if (s.recorded.size() != n || s.effective_dead_times.size() != n)
        throw DomainError("photon stream: field lengths disagree");
    if (static_cast<std::int64_t>(n) > s.config.max_detections())
        throw DomainError("photon stream: count exceeds ceil(T/dead_time)");
    for (std::size_t i = 0; i < n; ++i) {
        if (s.detections[i] < 0.0 || s.detections[i] >= s.exposure)
            throw DomainError("photon stream: detection outside [0, T)");
        if (i > 0 &&
            s.detections[i] - s.detections[i - 1] < s.effective_dead_times[i - 1] * (1.0 - 1e-12))
            throw DomainError("photon stream: detections violate dead time");
    }
    if (!std::is_sorted(s.recorded.begin(), s.recorded.end()))
        throw DomainError("photon stream: recorded timestamps not sorted");
}

// ---------------------------------------------------------------------------
// Estimates and curves
// ---------------------------------------------------------------------------

enum class EstimatorKind {
    IpSpadMle,             ///< first/last-timestamp estimator
    IpSpadFullMle,         ///< full conditional MLE with max-term
    PfSpadCounts,          ///< counts-only baseline
    FirstPhoton,           ///< reciprocal first-photon wait (variable exposure)
    RiseTimeCorrectedMle,  ///< MLE with time-varying efficiency integrals
    ConventionalLinear,    ///< linear well-filling inversion
};

inline const char* to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::IpSpadMle: return "ipspad";
        case EstimatorKind::IpSpadFullMle: return "full";
        case EstimatorKind::PfSpadCounts: return "counts";
        case EstimatorKind::FirstPhoton: return "first-photon";
        case EstimatorKind::RiseTimeCorrectedMle: return "rise-corrected";
        case EstimatorKind::ConventionalLinear: return "conventional";
    }
    return "unknown";
}

inline EstimatorKind estimator_kind_from_string(std::string_view s) {
    if (s == "ipspad") return EstimatorKind::IpSpadMle;
    if (s == "full") return EstimatorKind::IpSpadFullMle;
    if (s == "counts") return EstimatorKind::PfSpadCounts;
    if (s == "first-photon") return EstimatorKind::FirstPhoton;
    if (s == "rise-corrected") return EstimatorKind::RiseTimeCorrectedMle;
    if (s == "conventional") return EstimatorKind::ConventionalLinear;
    throw DomainError("unknown estimator: " + std::string(s));
}

/// A flux value with the estimator that produced it and its diagnostics.
/// flux may be +inf only for the saturated conventional model.
struct FluxEstimate {
    double flux = 0.0;                ///< photons per second
    EstimatorKind kind = EstimatorKind::IpSpadMle;
    std::int64_t n_detections = 0;
    /// Armed-and-waiting time in the estimator denominator (raw, pre-clamp).
    double darkness_total = 0.0;
    bool denominator_clamped = false; ///< denominator floor engaged
    bool saturated = false;           ///< conventional hard saturation
};

enum class CurveKind { Theoretical, MonteCarlo };

inline const char* to_string(CurveKind k) {
    return k == CurveKind::Theoretical ? "theory" : "monte-carlo";
}

/// Flux grid paired with SNR values in decibels.
struct SnrCurve {
    std::vector<double> flux_grid;  ///< strictly increasing, photons/s
    std::vector<double> snr_db;
    CurveKind kind = CurveKind::Theoretical;
    std::string label;

    void validate() const {
        if (flux_grid.size() != snr_db.size())
            throw DomainError("snr curve: grid/value lengths disagree");
        for (std::size_t i = 1; i < flux_grid.size(); ++i)
            if (!(flux_grid[i] > flux_grid[i - 1]))
                throw DomainError("snr curve: flux grid not strictly increasing");
    }
};

// ---------------------------------------------------------------------------
// Flux image
// ---------------------------------------------------------------------------

/// 2-D array of linear flux values (photons/s), row-major, 1 or 3 channels.
/// Stored as 32-bit floats so the float-map file format round-trips exactly.
struct FluxImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<float> data;

    [[nodiscard]] std::size_t index(int x, int y, int c = 0) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    [[nodiscard]] float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
    float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }

    void validate() const {
        if (width < 0 || height < 0 || (channels != 1 && channels != 3))
            throw DomainError("flux image: bad dimensions");
        if (data.size() != static_cast<std::size_t>(width) * height * channels)
            throw DomainError("flux image: data length mismatch");
        for (float v : data)
            if (!std::isfinite(v) || v < 0.0f)
                throw DomainError("flux image: values must be finite and >= 0");
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Times-of-darkness between successive detections, from recorded timestamps
/// and the dead time actually applied after each detection. Quantization can
/// make a raw difference slightly negative; such values clamp to 0.
/// Empty for fewer than two detections.
inline std::vector<double> interphoton_times(const PhotonStream& s) {
    std::vector<double> ys;
    if (s.recorded.size() < 2) return ys;
    ys.reserve(s.recorded.size() - 1);
    for (std::size_t i = 0; i + 1 < s.recorded.size(); ++i) {
        const double y = s.recorded[i + 1] - s.recorded[i] - s.effective_dead_times[i];
        ys.push_back(y > 0.0 ? y : 0.0);
    }
    return ys;
}

/// Same, but subtracting one externally supplied dead time (e.g. calibrated)
/// instead of the per-detection values stored in the stream.
inline std::vector<double> interphoton_times(const PhotonStream& s, double dead_time) {
    std::vector<double> ys;
    if (s.recorded.size() < 2) return ys;
    ys.reserve(s.recorded.size() - 1);
    for (std::size_t i = 0; i + 1 < s.recorded.size(); ++i) {
        const double y = s.recorded[i + 1] - s.recorded[i] - dead_time;
        ys.push_back(y > 0.0 ? y : 0.0);
    }
    return ys;
}

}  // namespace ipspad
