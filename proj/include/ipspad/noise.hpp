#pragma once
// Theoretical SNR models for the three pixel types and the Monte Carlo SNR
// sweep harness. SNR(flux) = 10*log10(flux^2 / MSE) where the MSE combines
// shot noise, quantization noise and the dark-rate bias.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ipspad/core.hpp"
#include "ipspad/estimate.hpp"
#include "ipspad/parallel.hpp"
#include "ipspad/sim.hpp"
#include "ipspad/stats.hpp"

namespace ipspad {

inline constexpr double snr_floor_db = -100.0;
inline constexpr double snr_cap_db = 300.0;

/// Guarded conversion: zero MSE caps at +300 dB, non-finite MSE floors at
/// -100 dB, everything else clamps into [-100, 300].
inline double snr_db_from_mse(double flux, double mse) {
    if (!std::isfinite(mse)) return snr_floor_db;
    if (mse <= 0.0) return snr_cap_db;
    const double v = 10.0 * std::log10(flux * flux / mse);
    if (v > snr_cap_db) return snr_cap_db;
    if (v < snr_floor_db) return snr_floor_db;
    return v;
}

namespace detail {
/// Shot-noise variance of the timing estimator: flux*(q*flux*tau + 1)/(q*T).
inline double shot_variance(double flux, double q, double tau, double T) {
    return flux * (q * flux * tau + 1.0) / (q * T);
}
/// Dark-rate bias mapped to flux units.
inline double dark_bias(double dark_rate, double q) { return dark_rate / q; }
}  // namespace detail

/// Timing-estimator theory SNR with the two-factor time-quantization term
///   V_tq = (1 + q*flux*(tau+delta))^2 (1 + q*flux*delta)^2 / (12 q^2 T^2).
inline double snr_theory_ipspad(double flux, const PixelConfig& cfg) {
    if (!(flux > 0.0)) throw DomainError("snr_theory_ipspad: flux must be > 0");
    const double q = cfg.quantum_efficiency;
    const double tau = cfg.dead_time;
    const double T = cfg.exposure_time;
    const double delta = cfg.time_quantization;
    const double a = 1.0 + q * flux * tau + q * flux * delta;
    const double b = 1.0 + q * flux * delta;
    const double v_tq = a * a * b * b / (12.0 * q * q * T * T);
    const double bias = detail::dark_bias(cfg.dark_rate, q);
    const double mse = detail::shot_variance(flux, q, tau, T) + v_tq + bias * bias;
    return snr_db_from_mse(flux, mse);
}

/// Counts-only theory SNR with the quartic count-quantization term
///   V_cq = (1 + q*flux*tau)^4 / (12 q^2 T^2).
inline double snr_theory_pfspad(double flux, const PixelConfig& cfg) {
    if (!(flux > 0.0)) throw DomainError("snr_theory_pfspad: flux must be > 0");
    const double q = cfg.quantum_efficiency;
    const double tau = cfg.dead_time;
    const double T = cfg.exposure_time;
    const double a = 1.0 + q * flux * tau;
    const double v_cq = a * a * a * a / (12.0 * q * q * T * T);
    const double bias = detail::dark_bias(cfg.dark_rate, q);
    const double mse = detail::shot_variance(flux, q, tau, T) + v_cq + bias * bias;
    return snr_db_from_mse(flux, mse);
}

/// Conventional pixel: MSE = (q*flux*T + dark*T + sigma_r^2)/(q*T)^2 below
/// full well, the display floor at/above hard saturation.
inline double snr_theory_conventional(double flux, const ConventionalConfig& cfg) {
    if (!(flux > 0.0)) throw DomainError("snr_theory_conventional: flux must be > 0");
    const double q = cfg.quantum_efficiency;
    const double T = cfg.exposure_time;
    if (q * flux * T >= static_cast<double>(cfg.full_well_capacity)) return snr_floor_db;
    const double mse = (q * flux * T + cfg.dark_rate * T +
                        cfg.read_noise_sigma * cfg.read_noise_sigma) /
                       (q * T * q * T);
    return snr_db_from_mse(flux, mse);
}

/// Log-spaced grid, inclusive of both endpoints.
inline std::vector<double> log_grid(double lo, double hi, int points) {
    if (!(lo > 0.0) || !(hi > lo) || points < 2)
        throw DomainError("log_grid: need 0 < lo < hi and points >= 2");
    std::vector<double> g(points);
    const double llo = std::log10(lo), lhi = std::log10(hi);
    for (int i = 0; i < points; ++i)
        g[i] = std::pow(10.0, llo + (lhi - llo) * i / (points - 1));
    return g;
}

/// One Monte Carlo SNR sweep: grid, trial count, estimator and pixel model.
struct SweepSpec {
    std::vector<double> flux_grid;
    int trials_per_point = 10;
    EstimatorKind estimator = EstimatorKind::IpSpadMle;
    std::variant<PixelConfig, ConventionalConfig> config = PixelConfig{};
    std::uint64_t master_seed = 1;

    void validate() const {
        if (trials_per_point < 2)
            throw DomainError("sweep: trials_per_point must be >= 2");
        if (flux_grid.size() < 1) throw DomainError("sweep: empty flux grid");
        for (std::size_t i = 1; i < flux_grid.size(); ++i)
            if (!(flux_grid[i] > flux_grid[i - 1]))
                throw DomainError("sweep: flux grid not strictly increasing");
        if (flux_grid.front() < 1e2 || flux_grid.back() > 1e16)
            throw DomainError("sweep: grid must lie within [1e2, 1e16]");
        if (std::holds_alternative<PixelConfig>(config))
            std::get<PixelConfig>(config).validate();
        else
            std::get<ConventionalConfig>(config).validate();
    }
};

struct SweepPointDiag {
    double flux = 0.0;
    int trials = 0;
    int excluded = 0;          ///< estimator-error trials treated as missing
    double mean_detections = 0.0;
};

struct SweepResult {
    SnrCurve curve;
    std::vector<SweepPointDiag> diagnostics;
};

namespace detail {

inline FluxEstimate run_sweep_trial(double flux, EstimatorKind kind,
                                    const std::variant<PixelConfig, ConventionalConfig>& config,
                                    std::uint64_t trial_key) {
    if (kind == EstimatorKind::ConventionalLinear) {
        const auto& cfg = std::get<ConventionalConfig>(config);
        return conventional_linear(simulate_conventional(flux, cfg, {trial_key, 0}), cfg);
    }
    const auto& cfg = std::get<PixelConfig>(config);
    switch (kind) {
        case EstimatorKind::FirstPhoton: {
            // Variable exposure: wait for the first detection, however long.
            SplitMix64 rng(SimSeed{trial_key, 0}.key());
            const double rate = cfg.quantum_efficiency * flux + cfg.dark_rate;
            if (rate <= 0.0) throw InsufficientPhotons("first photon never arrives");
            return first_photon_estimate(sample_exponential(rng, rate),
                                         cfg.quantum_efficiency);
        }
        case EstimatorKind::IpSpadMle: {
            const PhotonStream s = simulate_stream(flux, cfg, {trial_key, 0});
            return ipspad_mle(s, cfg.quantum_efficiency, cfg.dead_time);
        }
        case EstimatorKind::IpSpadFullMle: {
            const PhotonStream s = simulate_stream(flux, cfg, {trial_key, 0});
            return ipspad_full_mle(s, cfg.quantum_efficiency, cfg.dead_time,
                                   cfg.exposure_time);
        }
        case EstimatorKind::RiseTimeCorrectedMle: {
            const PhotonStream s = simulate_stream(flux, cfg, {trial_key, 0});
            const RiseProfile profile{cfg.rise_time,
                                      cfg.rise_time > 0.0 ? RiseShape::LinearRamp
                                                          : RiseShape::Step,
                                      cfg.quantum_efficiency};
            return risetime_corrected_mle(s, profile, cfg.dead_time, cfg.exposure_time);
        }
        case EstimatorKind::PfSpadCounts: {
            const PhotonStream s = simulate_stream(flux, cfg, {trial_key, 0});
            return pfspad_counts(s.size(), cfg.quantum_efficiency, cfg.dead_time,
                                 cfg.exposure_time);
        }
        default:
            throw DomainError("unsupported estimator in sweep");
    }
}

inline std::string sweep_label(const SweepSpec& spec) {
    std::ostringstream os;
    os << to_string(spec.estimator);
    if (std::holds_alternative<PixelConfig>(spec.config)) {
        const auto& c = std::get<PixelConfig>(spec.config);
        os << " q=" << c.quantum_efficiency << " tau_d=" << c.dead_time
           << " T=" << c.exposure_time << " delta=" << c.time_quantization
           << " dark=" << c.dark_rate;
    } else {
        const auto& c = std::get<ConventionalConfig>(spec.config);
        os << " q=" << c.quantum_efficiency << " T=" << c.exposure_time
           << " fwc=" << c.full_well_capacity << " sigma_r=" << c.read_noise_sigma
           << " dark=" << c.dark_rate;
    }
    os << " trials=" << spec.trials_per_point << " seed=" << spec.master_seed;
    return os.str();
}

}  // namespace detail

/// Run the sweep. Each (point, trial) gets its own derived seed, so results
/// are identical for any thread count. Estimator errors (e.g. too few
/// photons) exclude the trial; a point with no surviving trials floors.
inline SweepResult monte_carlo_snr(const SweepSpec& spec, int threads = 1) {
    spec.validate();
    const auto n_points = spec.flux_grid.size();
    const auto trials = spec.trials_per_point;

    SweepResult out;
    out.curve.kind = CurveKind::MonteCarlo;
    out.curve.label = detail::sweep_label(spec);
    out.curve.flux_grid = spec.flux_grid;
    out.curve.snr_db.assign(n_points, 0.0);
    out.diagnostics.assign(n_points, {});

    parallel_for(static_cast<std::int64_t>(n_points), threads, [&](std::int64_t i) {
        const double flux = spec.flux_grid[i];
        SweepPointDiag diag;
        diag.flux = flux;
        diag.trials = trials;
        double sq_err_sum = 0.0;
        std::int64_t included = 0;
        double det_sum = 0.0;
        for (int j = 0; j < trials; ++j) {
            const std::uint64_t key =
                derive_key(spec.master_seed, static_cast<std::uint64_t>(i),
                           static_cast<std::uint64_t>(j));
            try {
                const FluxEstimate est =
                    detail::run_sweep_trial(flux, spec.estimator, spec.config, key);
                const double err = flux - est.flux;
                sq_err_sum += err * err;
                det_sum += static_cast<double>(est.n_detections);
                ++included;
            } catch (const std::runtime_error&) {
                ++diag.excluded;
            }
        }
        diag.mean_detections = included > 0 ? det_sum / static_cast<double>(included) : 0.0;
        out.curve.snr_db[i] =
            included > 0
                ? snr_db_from_mse(flux, sq_err_sum / static_cast<double>(included))
                : snr_floor_db;
        out.diagnostics[i] = diag;
    });
    return out;
}

/// KS p-value of fixed-exposure first-photon arrival times, conditioned on a
/// detection inside [0, T], against Uniform[0, T]. Uniformity is the low-flux
/// limit (q*flux*T << 1); at higher flux the test should reject.
inline double first_photon_uniformity(double flux, double exposure, double q,
                                      int trials, std::uint64_t seed = 1) {
    if (!(flux > 0.0) || !(exposure > 0.0) || !(q > 0.0) || trials < 2)
        throw DomainError("first_photon_uniformity: bad arguments");
    SplitMix64 rng(derive_key(seed, 0x5au));
    std::vector<double> accepted;
    accepted.reserve(static_cast<std::size_t>(trials));
    const double rate = q * flux;
    // Acceptance probability is 1 - exp(-rate*T); cap attempts so a
    // pathologically low flux cannot spin forever.
    const std::int64_t max_attempts =
        static_cast<std::int64_t>(trials) *
        static_cast<std::int64_t>(std::ceil(10.0 / std::max(1e-6, -std::expm1(-rate * exposure))));
    std::int64_t attempts = 0;
    while (static_cast<int>(accepted.size()) < trials && attempts < max_attempts) {
        ++attempts;
        const double y = sample_exponential(rng, rate);
        if (y <= exposure) accepted.push_back(y);
    }
    if (static_cast<int>(accepted.size()) < trials)
        throw DomainError("first_photon_uniformity: flux too low to collect samples");
    return stats::ks_test(std::move(accepted),
                          [exposure](double t) { return t / exposure; })
        .p_value;
}

/// Ratio flux_max/flux_min of the largest contiguous grid segment with
/// SNR >= threshold; 0 when no grid point qualifies.
inline double dynamic_range(const SnrCurve& curve, double threshold_db) {
    curve.validate();
    double best = 0.0;
    std::size_t i = 0;
    const std::size_t n = curve.flux_grid.size();
    while (i < n) {
        if (curve.snr_db[i] < threshold_db) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && curve.snr_db[j + 1] >= threshold_db) ++j;
        best = std::max(best, curve.flux_grid[j] / curve.flux_grid[i]);
        i = j + 1;
    }
    return best;
}

}  // namespace ipspad
