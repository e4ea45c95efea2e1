#pragma once
// Per-pixel image simulation and reconstruction: ground-truth flux image ->
// photon streams -> per-pixel estimates -> reconstructed image, plus 8-bit
// tone-mapped output. The pixel loop is data-parallel with per-pixel derived
// seeds, so reconstructions are byte-identical for any thread count.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ipspad/core.hpp"
#include "ipspad/estimate.hpp"
#include "ipspad/parallel.hpp"
#include "ipspad/rng.hpp"
#include "ipspad/sim.hpp"

namespace ipspad {

struct ImageSimResult {
    FluxImage reconstruction;
    /// One byte per pixel-channel: 255 where the estimator failed (too few
    /// photons); such entries hold flux 0 in the reconstruction.
    std::vector<std::uint8_t> failure_mask;
    std::int64_t failed = 0;
    double mean_detections = 0.0;
};

/// Simulate every pixel-channel of `truth` (linear photons/s) and estimate it
/// back with the chosen estimator.
inline ImageSimResult simulate_image(const FluxImage& truth, const PixelConfig& cfg,
                                     EstimatorKind estimator,
                                     std::uint64_t master_seed, int threads = 1) {
    truth.validate();
    cfg.validate();

    ImageSimResult out;
    out.reconstruction = truth;
    out.failure_mask.assign(truth.data.size(), 0);
    std::vector<double> detections(truth.data.size(), 0.0);

    const RiseProfile profile{cfg.rise_time,
                              cfg.rise_time > 0.0 ? RiseShape::LinearRamp
                                                  : RiseShape::Step,
                              cfg.quantum_efficiency};

    parallel_for(static_cast<std::int64_t>(truth.data.size()), threads,
                 [&](std::int64_t idx) {
                     const double flux = truth.data[static_cast<std::size_t>(idx)];
                     const PhotonStream s = simulate_stream(
                         flux, cfg, {master_seed, static_cast<std::uint64_t>(idx)});
                     detections[static_cast<std::size_t>(idx)] =
                         static_cast<double>(s.size());
                     double value = 0.0;
                     bool failed = false;
                     try {
                         FluxEstimate est;
                         switch (estimator) {
                             case EstimatorKind::IpSpadMle:
                                 est = ipspad_mle(s, cfg.quantum_efficiency, cfg.dead_time);
                                 break;
                             case EstimatorKind::IpSpadFullMle:
                                 est = ipspad_full_mle(s, cfg.quantum_efficiency,
                                                       cfg.dead_time, cfg.exposure_time);
                                 break;
                             case EstimatorKind::PfSpadCounts:
                                 est = pfspad_counts(s.size(), cfg.quantum_efficiency,
                                                     cfg.dead_time, cfg.exposure_time);
                                 break;
                             case EstimatorKind::RiseTimeCorrectedMle:
                                 est = risetime_corrected_mle(s, profile, cfg.dead_time,
                                                              cfg.exposure_time);
                                 break;
                             default:
                                 throw DomainError("unsupported estimator for images");
                         }
                         value = est.flux;
                     } catch (const std::runtime_error&) {
                         failed = true;
                     }
                     if (failed || !std::isfinite(value) || value < 0.0) {
                         out.reconstruction.data[static_cast<std::size_t>(idx)] = 0.0f;
                         out.failure_mask[static_cast<std::size_t>(idx)] = 255;
                     } else {
                         out.reconstruction.data[static_cast<std::size_t>(idx)] =
                             static_cast<float>(value);
                     }
                 });

    double det_sum = 0.0;
    for (double d : detections) det_sum += d;
    out.mean_detections =
        truth.data.empty() ? 0.0 : det_sum / static_cast<double>(truth.data.size());
    for (std::uint8_t m : out.failure_mask)
        if (m) ++out.failed;
    return out;
}

/// Variable-exposure first-photon imaging: each pixel waits for its first
/// detection. k = 1 estimates 1/(q*Y); k > 1 averages k debiased
/// log-timestamps before exponentiating, shrinking the log-domain variance
/// to (pi^2/6)/k. Pixels with zero flux fail (no photon ever arrives).
inline ImageSimResult simulate_image_first_photon(const FluxImage& truth, double q,
                                                  std::uint64_t master_seed, int k = 1,
                                                  int threads = 1) {
    truth.validate();
    if (!(q > 0.0) || q > 1.0) throw ConfigError("quantum efficiency must be in (0,1]");
    if (k < 1) throw DomainError("photon count k must be >= 1");

    ImageSimResult out;
    out.reconstruction = truth;
    out.failure_mask.assign(truth.data.size(), 0);

    parallel_for(static_cast<std::int64_t>(truth.data.size()), threads,
                 [&](std::int64_t idx) {
                     const double flux = truth.data[static_cast<std::size_t>(idx)];
                     if (!(flux > 0.0)) {
                         out.reconstruction.data[static_cast<std::size_t>(idx)] = 0.0f;
                         out.failure_mask[static_cast<std::size_t>(idx)] = 255;
                         return;
                     }
                     SplitMix64 rng(
                         SimSeed{master_seed, static_cast<std::uint64_t>(idx)}.key());
                     double value;
                     if (k == 1) {
                         const double y = sample_exponential(rng, q * flux);
                         value = first_photon_estimate(y, q).flux;
                     } else {
                         double log_sum = 0.0;
                         for (int i = 0; i < k; ++i) {
                             const double y = sample_exponential(rng, q * flux);
                             log_sum += -std::log(y) - euler_gamma;
                         }
                         value = std::exp(log_sum / k) / q;
                     }
                     out.reconstruction.data[static_cast<std::size_t>(idx)] =
                         static_cast<float>(value);
                 });
    out.mean_detections = static_cast<double>(k);
    for (std::uint8_t m : out.failure_mask)
        if (m) ++out.failed;
    return out;
}

namespace detail {

inline void write_pnm_header(std::ostream& os, int channels, int w, int h) {
    os << (channels == 3 ? "P6" : "P5") << '\n' << w << ' ' << h << '\n' << "255\n";
}

}  // namespace detail

/// Write an 8-bit binary PGM (P5) or PPM (P6): logarithmic normalization of
/// [min positive, max] to [0,1], then gamma, then 255 steps. A degenerate
/// range (constant image) maps everything positive to full scale; values
/// <= 0 map to black.
inline void tonemap_to_pgm(const FluxImage& img, const std::string& path,
                           double gamma = 2.2) {
    img.validate();
    if (!(gamma > 0.0)) throw DomainError("tonemap: gamma must be > 0");

    double min_pos = std::numeric_limits<double>::infinity();
    double max_v = 0.0;
    for (float v : img.data) {
        if (v > 0.0f) min_pos = std::min(min_pos, static_cast<double>(v));
        max_v = std::max(max_v, static_cast<double>(v));
    }
    const bool degenerate = !(max_v > min_pos);
    const double log_lo = degenerate ? 0.0 : std::log(min_pos);
    const double log_span = degenerate ? 1.0 : std::log(max_v) - log_lo;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    detail::write_pnm_header(f, img.channels, img.width, img.height);
    std::vector<unsigned char> bytes;
    bytes.reserve(img.data.size());
    for (float v : img.data) {
        double level = 0.0;
        if (v > 0.0f)
            level = degenerate
                        ? 1.0
                        : std::clamp((std::log(static_cast<double>(v)) - log_lo) / log_span,
                                     0.0, 1.0);
        bytes.push_back(static_cast<unsigned char>(
            std::lround(255.0 * std::pow(level, 1.0 / gamma))));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

/// Failure mask as a single-channel PGM; a pixel is white if any of its
/// channels failed.
inline void write_mask_pgm(const ImageSimResult& result, const std::string& path) {
    const FluxImage& img = result.reconstruction;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    detail::write_pnm_header(f, 1, img.width, img.height);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(img.width) * img.height, 0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                if (result.failure_mask[img.index(x, y, c)])
                    bytes[static_cast<std::size_t>(y) * img.width + x] = 255;
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace ipspad
