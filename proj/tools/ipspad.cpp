// Command-line entry point: reproducible photon-stream simulation, flux
// estimation, SNR sweeps, HDR image simulation and dead-time calibration.
//
// Conventions: stdout carries machine-readable results only, stderr carries
// logs and errors. Exit codes: 0 success, 1 runtime error, 2 usage error.
// All quantities are seconds and photons per second.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ipspad/ipspad.hpp"

namespace {

using json = nlohmann::json;

struct PixelFlags {
    double q = 1.0;
    double dead_time = 100e-9;
    double exposure = 1e-3;
    double delta = 0.0;
    double dark_rate = 0.0;
    double jitter = 0.0;
    double rise_time = 0.0;
    double drift = 0.0;

    void add_options(CLI::App& cmd) {
        cmd.add_option("--q", q, "Quantum efficiency in (0,1]");
        cmd.add_option("--dead-time", dead_time, "Dead time in seconds");
        cmd.add_option("--exposure", exposure, "Exposure time in seconds");
        cmd.add_option("--delta", delta, "Timestamp quantization bin in seconds (0 = continuous)");
        cmd.add_option("--dark-rate", dark_rate, "Dark detections per second");
        cmd.add_option("--jitter", jitter,
                       "Timestamp jitter sigma in seconds (typical hardware ~200 ps)");
        cmd.add_option("--rise-time", rise_time, "Efficiency rise time in seconds (0 = step)");
        cmd.add_option("--drift", drift, "Dead-time drift per detection in seconds");
    }

    [[nodiscard]] ipspad::PixelConfig config() const {
        ipspad::PixelConfig c;
        c.quantum_efficiency = q;
        c.dead_time = dead_time;
        c.exposure_time = exposure;
        c.time_quantization = delta;
        c.dark_rate = dark_rate;
        c.timestamp_jitter_sigma = jitter;
        c.rise_time = rise_time;
        c.drift_coefficient = drift;
        return c;
    }
};

std::string fmt(double v) { return ipspad::io::detail::format_double(v); }

void parse_grid(const std::string& text, double& lo, double& hi, int& points) {
    const auto a = text.find(':');
    const auto b = text.find(':', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos)
        throw CLI::ValidationError("--grid", "expected lo:hi:points, e.g. 1e4:1e16:100");
    try {
        lo = std::stod(text.substr(0, a));
        hi = std::stod(text.substr(a + 1, b - a - 1));
        points = std::stoi(text.substr(b + 1));
    } catch (const std::exception&) {
        throw CLI::ValidationError("--grid", "expected lo:hi:points, e.g. 1e4:1e16:100");
    }
    if (!(lo > 0.0) || !(hi > lo) || points < 2)
        throw CLI::ValidationError("--grid", "need 0 < lo < hi and points >= 2");
}

// Fill flags from a JSON config file; explicit command-line flags win.
void apply_json_config(CLI::App& cmd, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ipspad::IoError("cannot open config: " + path);
    json j = json::parse(f);
    for (const auto& [key, value] : j.items()) {
        CLI::Option* opt = cmd.get_option_no_throw("--" + key);
        if (opt == nullptr) throw ipspad::DomainError("config: unknown key '" + key + "'");
        if (opt->count() > 0) continue;  // flag given explicitly
        if (value.is_boolean()) {
            if (value.get<bool>()) opt->add_result("true");
        } else if (value.is_string()) {
            opt->add_result(value.get<std::string>());
        } else {
            opt->add_result(value.dump());
        }
        opt->run_callback();
    }
}

ipspad::RiseProfile profile_for(const ipspad::PixelConfig& cfg) {
    return {cfg.rise_time,
            cfg.rise_time > 0.0 ? ipspad::RiseShape::LinearRamp : ipspad::RiseShape::Step,
            cfg.quantum_efficiency};
}

// ---------------------------------------------------------------------------

int run_simulate(const PixelFlags& px, double flux, std::uint64_t seed,
                 std::uint64_t pixel_index, const std::string& out) {
    const ipspad::PhotonStream s =
        ipspad::simulate_stream(flux, px.config(), {seed, pixel_index});
    ipspad::io::write_stream_file(s, out);
    std::cout << "n_detections=" << s.size() << '\n';
    return 0;
}

int run_estimate(const std::string& in, const std::string& estimator_name,
                 const CLI::App& cmd, PixelFlags& px, bool calibrate,
                 double bin_width, const std::string& histogram_out,
                 double histogram_bin, double histogram_max) {
    ipspad::PhotonStream s = ipspad::io::read_stream_file(in);
    // Stream header supplies q / dead time / exposure unless overridden.
    if (cmd.get_option("--q")->count() == 0) px.q = s.config.quantum_efficiency;
    if (cmd.get_option("--dead-time")->count() == 0) px.dead_time = s.config.dead_time;
    if (cmd.get_option("--exposure")->count() == 0) px.exposure = s.exposure;

    double dead_time = px.dead_time;
    if (calibrate) {
        dead_time = ipspad::calibrate_dead_time({&s, 1}, bin_width);
        std::cerr << "calibrated dead time: " << fmt(dead_time) << " s\n";
    }

    if (!histogram_out.empty()) {
        const auto h = ipspad::interphoton_histogram(s, histogram_bin, histogram_max);
        std::ofstream f(histogram_out, std::ios::binary);
        if (!f) throw ipspad::IoError("cannot open for writing: " + histogram_out);
        ipspad::io::write_histogram_csv(h, f);
    }

    const auto kind = ipspad::estimator_kind_from_string(estimator_name);
    ipspad::FluxEstimate est;
    switch (kind) {
        case ipspad::EstimatorKind::IpSpadMle:
            est = ipspad::ipspad_mle(s, px.q, dead_time);
            break;
        case ipspad::EstimatorKind::IpSpadFullMle:
            est = ipspad::ipspad_full_mle(s, px.q, dead_time, px.exposure);
            break;
        case ipspad::EstimatorKind::PfSpadCounts:
            est = ipspad::pfspad_counts(s.size(), px.q, dead_time, px.exposure);
            break;
        case ipspad::EstimatorKind::FirstPhoton: {
            if (s.size() < 1) throw ipspad::InsufficientPhotons("stream has no detection");
            est = ipspad::first_photon_estimate(s.recorded.front(), px.q);
            break;
        }
        case ipspad::EstimatorKind::RiseTimeCorrectedMle: {
            ipspad::RiseProfile profile{px.rise_time,
                                        px.rise_time > 0.0 ? ipspad::RiseShape::LinearRamp
                                                           : ipspad::RiseShape::Step,
                                        px.q};
            est = ipspad::risetime_corrected_mle(s, profile, dead_time, px.exposure);
            break;
        }
        default:
            throw ipspad::DomainError("estimator not usable on stream files: " +
                                      estimator_name);
    }
    std::cout << "flux_photons_per_s=" << fmt(est.flux) << '\n'
              << "estimator=" << ipspad::to_string(est.kind) << '\n'
              << "n_detections=" << est.n_detections << '\n'
              << "darkness_total_s=" << fmt(est.darkness_total) << '\n'
              << "dead_time_used_s=" << fmt(dead_time) << '\n'
              << "denominator_clamped=" << (est.denominator_clamped ? 1 : 0) << '\n'
              << "saturated=" << (est.saturated ? 1 : 0) << '\n';
    return 0;
}

int run_snr_sweep(const PixelFlags& px, const std::string& grid_text, int trials,
                  const std::string& estimator_name, std::int64_t fwc,
                  double read_noise, std::uint64_t seed, const std::string& out,
                  bool theory, bool gnuplot, int threads) {
    double lo, hi;
    int points;
    parse_grid(grid_text, lo, hi, points);

    ipspad::SweepSpec spec;
    spec.flux_grid = ipspad::log_grid(lo, hi, points);
    spec.trials_per_point = trials;
    spec.estimator = ipspad::estimator_kind_from_string(estimator_name);
    spec.master_seed = seed;
    if (spec.estimator == ipspad::EstimatorKind::ConventionalLinear) {
        ipspad::ConventionalConfig c;
        c.full_well_capacity = fwc;
        c.read_noise_sigma = read_noise;
        c.quantum_efficiency = px.q;
        c.exposure_time = px.exposure;
        c.dark_rate = px.dark_rate;
        spec.config = c;
    } else {
        spec.config = px.config();
    }

    const ipspad::SweepResult result = ipspad::monte_carlo_snr(spec, threads);
    std::vector<ipspad::SnrCurve> curves{result.curve};

    if (theory) {
        ipspad::SnrCurve th;
        th.kind = ipspad::CurveKind::Theoretical;
        th.flux_grid = spec.flux_grid;
        th.label = "theory " + result.curve.label;
        th.snr_db.reserve(spec.flux_grid.size());
        for (double flux : spec.flux_grid) {
            double v;
            switch (spec.estimator) {
                case ipspad::EstimatorKind::PfSpadCounts:
                    v = ipspad::snr_theory_pfspad(flux, std::get<ipspad::PixelConfig>(spec.config));
                    break;
                case ipspad::EstimatorKind::ConventionalLinear:
                    v = ipspad::snr_theory_conventional(
                        flux, std::get<ipspad::ConventionalConfig>(spec.config));
                    break;
                default:
                    v = ipspad::snr_theory_ipspad(flux, std::get<ipspad::PixelConfig>(spec.config));
                    break;
            }
            th.snr_db.push_back(v);
        }
        curves.push_back(std::move(th));
    }

    std::ofstream f(out, std::ios::binary);
    if (!f) throw ipspad::IoError("cannot open for writing: " + out);
    if (gnuplot) {
        for (const auto& c : curves) ipspad::io::write_snr_gnuplot(c, f);
    } else {
        ipspad::io::write_snr_csv(curves, f);
    }
    if (!f) throw ipspad::IoError("write failed: " + out);

    std::int64_t excluded = 0;
    for (const auto& d : result.diagnostics) excluded += d.excluded;
    if (excluded > 0)
        std::cerr << "excluded trials (estimator errors): " << excluded << '\n';
    return 0;
}

int run_hdr_sim(const std::string& in, double scale, const PixelFlags& px,
                const std::string& estimator_name, int first_photon_k,
                std::uint64_t seed, const std::string& out_pfm,
                const std::string& out_csv, const std::string& out_pgm,
                const std::string& mask_path, double gamma, int threads) {
    ipspad::FluxImage truth =
        ipspad::io::load_flux_image(in, ipspad::io::image_format_from_path(in));
    if (scale != 1.0)
        for (float& v : truth.data) v = static_cast<float>(v * scale);

    const auto kind = ipspad::estimator_kind_from_string(estimator_name);
    ipspad::ImageSimResult result =
        kind == ipspad::EstimatorKind::FirstPhoton
            ? ipspad::simulate_image_first_photon(truth, px.q, seed, first_photon_k, threads)
            : ipspad::simulate_image(truth, px.config(), kind, seed, threads);

    if (!out_pfm.empty())
        ipspad::io::write_flux_image(result.reconstruction, out_pfm,
                                     ipspad::io::ImageFormat::Pfm);
    if (!out_csv.empty())
        ipspad::io::write_flux_image(result.reconstruction, out_csv,
                                     ipspad::io::ImageFormat::Csv);
    if (!out_pgm.empty()) ipspad::tonemap_to_pgm(result.reconstruction, out_pgm, gamma);
    if (!mask_path.empty()) ipspad::write_mask_pgm(result, mask_path);

    std::cout << "pixels=" << result.reconstruction.data.size() << '\n'
              << "failed_pixels=" << result.failed << '\n'
              << "mean_detections=" << fmt(result.mean_detections) << '\n';
    return 0;
}

int run_calibrate(const std::vector<std::string>& inputs, double bin_width) {
    std::vector<ipspad::PhotonStream> streams;
    streams.reserve(inputs.size());
    for (const auto& path : inputs) streams.push_back(ipspad::io::read_stream_file(path));
    const double dead_time = ipspad::calibrate_dead_time(streams, bin_width);
    std::cout << "dead_time_s=" << fmt(dead_time) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Passive single-photon (dead-time limited) imaging simulator "
                 "and flux estimation toolkit"};
    app.require_subcommand(1);

    // simulate ---------------------------------------------------------------
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate one photon-detection stream");
    PixelFlags sim_px;
    double sim_flux = 0.0;
    std::uint64_t sim_seed = 1, sim_pixel = 0;
    std::string sim_out;
    sim_cmd->add_option("--flux", sim_flux, "True flux in photons/s")->required();
    sim_px.add_options(*sim_cmd);
    sim_cmd->add_option("--seed", sim_seed, "Master RNG seed");
    sim_cmd->add_option("--pixel-index", sim_pixel, "Substream index");
    sim_cmd->add_option("--out", sim_out, "Output stream file")->required();

    // estimate ---------------------------------------------------------------
    auto* est_cmd = app.add_subcommand("estimate", "Estimate flux from a stream file");
    PixelFlags est_px;
    std::string est_in, est_name = "ipspad", est_hist_out;
    bool est_calibrate = false;
    double est_bin = 1e-12, est_hist_bin = 1e-9, est_hist_max = 1e-6;
    est_cmd->add_option("--in", est_in, "Input stream file")->required();
    est_cmd->add_option("--estimator", est_name,
                        "ipspad|full|counts|first-photon|rise-corrected");
    est_px.add_options(*est_cmd);
    est_cmd->add_flag("--calibrate-dead-time", est_calibrate,
                      "Estimate dead time from the interval histogram first");
    est_cmd->add_option("--bin-width", est_bin, "Calibration histogram bin (s)");
    est_cmd->add_option("--histogram-out", est_hist_out,
                        "Also export the inter-photon histogram CSV");
    est_cmd->add_option("--histogram-bin", est_hist_bin, "Histogram bin width (s)");
    est_cmd->add_option("--histogram-max", est_hist_max, "Histogram upper edge (s)");

    // snr-sweep ----------------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand("snr-sweep", "Monte Carlo SNR sweep over a flux grid");
    PixelFlags sweep_px;
    sweep_px.q = 0.4;
    std::string sweep_grid = "1e4:1e16:100", sweep_name = "ipspad", sweep_out, sweep_config;
    int sweep_trials = 10, sweep_threads = 1;
    std::int64_t sweep_fwc = 34000;
    double sweep_read_noise = 5.0;
    std::uint64_t sweep_seed = 1;
    bool sweep_theory = false, sweep_gnuplot = false;
    sweep_cmd->add_option("--grid", sweep_grid, "Flux grid lo:hi:points (log-spaced)");
    sweep_cmd->add_option("--trials", sweep_trials, "Monte Carlo trials per grid point");
    sweep_cmd->add_option("--estimator", sweep_name,
                          "ipspad|full|counts|first-photon|rise-corrected|conventional");
    sweep_px.add_options(*sweep_cmd);
    sweep_cmd->add_option("--fwc", sweep_fwc, "Conventional full-well capacity (electrons)");
    sweep_cmd->add_option("--read-noise", sweep_read_noise, "Conventional read noise sigma (electrons)");
    sweep_cmd->add_option("--seed", sweep_seed, "Master RNG seed");
    sweep_cmd->add_option("--out", sweep_out, "Output CSV file")->required();
    sweep_cmd->add_flag("--theory", sweep_theory, "Co-emit the theoretical curve");
    sweep_cmd->add_flag("--gnuplot", sweep_gnuplot, "Two-column output instead of CSV");
    sweep_cmd->add_option("--threads", sweep_threads, "Worker threads");
    sweep_cmd->add_option("--config", sweep_config,
                          "JSON config file; keys match flag names, flags win");

    // hdr-sim ------------------------------------------------------------------
    auto* hdr_cmd = app.add_subcommand("hdr-sim", "Simulate imaging a ground-truth flux image");
    PixelFlags hdr_px;
    hdr_px.q = 0.4;
    std::string hdr_in, hdr_name = "ipspad", hdr_pfm, hdr_csv, hdr_pgm, hdr_mask;
    double hdr_scale = 1e9, hdr_gamma = 2.2;
    int hdr_threads = 1, hdr_k = 1;
    std::uint64_t hdr_seed = 1;
    hdr_cmd->add_option("--in", hdr_in, "Ground-truth image (.pfm or .csv)")->required();
    hdr_cmd->add_option("--scale", hdr_scale, "Photons/s per input radiance unit");
    hdr_px.add_options(*hdr_cmd);
    hdr_cmd->add_option("--estimator", hdr_name,
                        "ipspad|full|counts|rise-corrected|first-photon");
    hdr_cmd->add_option("--first-photon-k", hdr_k,
                        "Photons per pixel for the first-photon estimator");
    hdr_cmd->add_option("--seed", hdr_seed, "Master RNG seed");
    hdr_cmd->add_option("--out-pfm", hdr_pfm, "Reconstruction as PFM");
    hdr_cmd->add_option("--out-csv", hdr_csv, "Reconstruction as CSV");
    hdr_cmd->add_option("--out-pgm", hdr_pgm, "Tone-mapped 8-bit PGM/PPM");
    hdr_cmd->add_option("--mask", hdr_mask, "Failure mask as PGM");
    hdr_cmd->add_option("--gamma", hdr_gamma, "Tone-mapping gamma");
    hdr_cmd->add_option("--threads", hdr_threads, "Worker threads");

    // calibrate ----------------------------------------------------------------
    auto* cal_cmd = app.add_subcommand("calibrate", "Dead time from inter-photon histograms");
    std::vector<std::string> cal_in;
    double cal_bin = 1e-12;
    cal_cmd->add_option("--in", cal_in, "Input stream file(s)")->required();
    cal_cmd->add_option("--bin-width", cal_bin, "Histogram bin width (s)");

    try {
        app.parse(argc, argv);
        if (*sweep_cmd && !sweep_config.empty()) apply_json_config(*sweep_cmd, sweep_config);
        if (*sweep_cmd && sweep_trials < 2)
            throw CLI::ValidationError("--trials", "at least 2 trials required (variance undefined)");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n";
        std::cerr << (app.get_subcommands().empty() ? app.help()
                                                    : app.get_subcommands().front()->help());
        return 2;
    } catch (const ipspad::DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (*sim_cmd) return run_simulate(sim_px, sim_flux, sim_seed, sim_pixel, sim_out);
        if (*est_cmd)
            return run_estimate(est_in, est_name, *est_cmd, est_px, est_calibrate,
                                est_bin, est_hist_out, est_hist_bin, est_hist_max);
        if (*sweep_cmd)
            return run_snr_sweep(sweep_px, sweep_grid, sweep_trials, sweep_name,
                                 sweep_fwc, sweep_read_noise, sweep_seed, sweep_out,
                                 sweep_theory, sweep_gnuplot, sweep_threads);
        if (*hdr_cmd)
            return run_hdr_sim(hdr_in, hdr_scale, hdr_px, hdr_name, hdr_k, hdr_seed,
                               hdr_pfm, hdr_csv, hdr_pgm, hdr_mask, hdr_gamma,
                               hdr_threads);
        if (*cal_cmd) return run_calibrate(cal_in, cal_bin);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const ipspad::DomainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ipspad::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
