#pragma once
// File formats: photon-stream text files, PFM / CSV flux images, SNR-curve
// CSV export, histogram CSV export. All text output is locale-independent
// and full precision so write-read-write round trips are byte-identical.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ipspad/core.hpp"
#include "ipspad/estimate.hpp"

namespace ipspad::io {

namespace detail {

/// Shortest decimal form that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_float(float v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const char* what) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ParseError(std::string("cannot parse ") + what + ": '" +
                         std::string(text) + "'");
    return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Photon stream text format
// ---------------------------------------------------------------------------

/// Header lines T=, q=, tau_d=, delta=, then one recorded timestamp per line.
inline void write_stream(const PhotonStream& s, std::ostream& os) {
    os << "T=" << detail::format_double(s.exposure) << '\n'
       << "q=" << detail::format_double(s.config.quantum_efficiency) << '\n'
       << "tau_d=" << detail::format_double(s.config.dead_time) << '\n'
       << "delta=" << detail::format_double(s.config.time_quantization) << '\n';
    for (double r : s.recorded) os << detail::format_double(r) << '\n';
}

inline PhotonStream read_stream(std::istream& is) {
    PhotonStream s;
    std::string line;
    const char* headers[4] = {"T=", "q=", "tau_d=", "delta="};
    double values[4] = {};
    for (int i = 0; i < 4; ++i) {
        if (!std::getline(is, line))
            throw ParseError(std::string("stream file: missing header ") + headers[i]);
        const std::string_view key(headers[i]);
        if (line.rfind(headers[i], 0) != 0)
            throw ParseError("stream file: expected header '" + std::string(key) +
                             "', got '" + line + "'");
        values[i] = detail::parse_double(std::string_view(line).substr(key.size()),
                                         headers[i]);
    }
    s.exposure = values[0];
    s.config.exposure_time = values[0];
    s.config.quantum_efficiency = values[1];
    s.config.dead_time = values[2];
    s.config.time_quantization = values[3];
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const double t = detail::parse_double(line, "timestamp");
        if (!s.recorded.empty() && t < s.recorded.back())
            throw ParseError("stream file: timestamps not sorted");
        s.recorded.push_back(t);
    }
    // Only recorded stamps survive serialization; mirror them as the best
    // available detection times and assume the configured dead time.
    s.detections = s.recorded;
    s.effective_dead_times.assign(s.recorded.size(), s.config.dead_time);
    return s;
}

inline void write_stream_file(const PhotonStream& s, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    write_stream(s, f);
    if (!f) throw IoError("write failed: " + path);
}

inline PhotonStream read_stream_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    return read_stream(f);
}

// ---------------------------------------------------------------------------
// Flux images: PFM (binary float map) and CSV
// ---------------------------------------------------------------------------

enum class ImageFormat { Pfm, Csv };

inline ImageFormat image_format_from_path(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "pfm" || ext == "PFM") return ImageFormat::Pfm;
    if (ext == "csv" || ext == "CSV") return ImageFormat::Csv;
    throw DomainError("cannot infer image format from path: " + path);
}

namespace detail {

// PFM: 'PF' (3 channels) or 'Pf' (1 channel), dimensions, scale (sign gives
// endianness), then float32 scanlines ordered bottom-to-top.
inline void write_pfm(const FluxImage& img, std::ostream& os) {
    os << (img.channels == 3 ? "PF" : "Pf") << '\n'
       << img.width << ' ' << img.height << '\n'
       << "-1.0" << '\n';
    for (int y = img.height - 1; y >= 0; --y) {
        const char* row =
            reinterpret_cast<const char*>(img.data.data() + img.index(0, y, 0));
        os.write(row, static_cast<std::streamsize>(sizeof(float)) * img.width *
                          img.channels);
    }
}

inline std::string read_pfm_token(std::istream& is) {
    std::string tok;
    is >> tok;
    return tok;
}

inline FluxImage read_pfm(std::istream& is) {
    const std::string magic = read_pfm_token(is);
    FluxImage img;
    if (magic == "PF")
        img.channels = 3;
    else if (magic == "Pf")
        img.channels = 1;
    else
        throw ParseError("PFM: bad magic '" + magic + "' at byte 0");
    img.width = static_cast<int>(parse_double(read_pfm_token(is), "PFM width"));
    img.height = static_cast<int>(parse_double(read_pfm_token(is), "PFM height"));
    const double scale = parse_double(read_pfm_token(is), "PFM scale");
    if (img.width <= 0 || img.height <= 0) throw ParseError("PFM: bad dimensions");
    is.get();  // single whitespace byte terminating the header
    const bool little_endian = scale < 0.0;
    const double magnitude = std::abs(scale);

    img.data.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
    std::vector<float> row(static_cast<std::size_t>(img.width) * img.channels);
    for (int y = img.height - 1; y >= 0; --y) {
        const std::streamoff offset = is.tellg();
        is.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(sizeof(float)) * row.size());
        if (!is)
            throw ParseError("PFM: truncated pixel data at byte " +
                             std::to_string(static_cast<long long>(offset)));
        if (!little_endian) {
            for (float& v : row) {
                std::uint32_t u;
                std::memcpy(&u, &v, 4);
                u = __builtin_bswap32(u);
                std::memcpy(&v, &u, 4);
            }
        }
        for (std::size_t i = 0; i < row.size(); ++i) {
            float v = row[i];
            if (magnitude != 1.0) v = static_cast<float>(v * magnitude);
            if (!std::isfinite(v))
                throw ParseError("PFM: non-finite value at byte " +
                                 std::to_string(static_cast<long long>(offset)));
            if (v < 0.0f)
                throw ParseError("PFM: negative flux value at byte " +
                                 std::to_string(static_cast<long long>(offset)));
            img.data[img.index(0, y, 0) + i] = v;
        }
    }
    return img;
}

// CSV: one image row per line, comma-separated, single channel.
inline void write_csv(const FluxImage& img, std::ostream& os) {
    for (int y = 0; y < img.height; ++y) {
        for (int i = 0; i < img.width * img.channels; ++i) {
            if (i) os << ',';
            os << format_float(img.data[img.index(0, y, 0) + i]);
        }
        os << '\n';
    }
}

inline FluxImage read_csv(std::istream& is) {
    FluxImage img;
    std::string line;
    std::size_t byte = 0;
    int row = 0;
    while (std::getline(is, line)) {
        if (line.empty()) {
            byte += 1;
            continue;
        }
        std::vector<float> vals;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            const std::string_view cell(line.data() + pos, comma - pos);
            double v;
            try {
                v = parse_double(cell, "CSV value");
            } catch (const ParseError&) {
                throw ParseError("CSV: cannot parse value at byte " +
                                 std::to_string(byte + pos));
            }
            if (v < 0.0)
                throw ParseError("CSV: negative flux value at byte " +
                                 std::to_string(byte + pos));
            vals.push_back(static_cast<float>(v));
            pos = comma + 1;
        }
        if (row == 0) {
            img.width = static_cast<int>(vals.size());
        } else if (static_cast<int>(vals.size()) != img.width) {
            throw ParseError("CSV: ragged row at byte " + std::to_string(byte));
        }
        img.data.insert(img.data.end(), vals.begin(), vals.end());
        ++row;
        byte += line.size() + 1;
    }
    img.height = row;
    img.channels = 1;
    if (row == 0) throw ParseError("CSV: empty image");
    return img;
}

}  // namespace detail

inline FluxImage load_flux_image(const std::string& path, ImageFormat format) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    FluxImage img = format == ImageFormat::Pfm ? detail::read_pfm(f)
                                               : detail::read_csv(f);
    img.validate();
    return img;
}

inline void write_flux_image(const FluxImage& img, const std::string& path,
                             ImageFormat format) {
    img.validate();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    if (format == ImageFormat::Pfm)
        detail::write_pfm(img, f);
    else
        detail::write_csv(img, f);
    if (!f) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Curve and histogram export
// ---------------------------------------------------------------------------

/// CSV rows: flux,snr_db,kind,label (one header line).
inline void write_snr_csv(std::span<const SnrCurve> curves, std::ostream& os) {
    os << "flux,snr_db,kind,label\n";
    for (const SnrCurve& c : curves) {
        c.validate();
        for (std::size_t i = 0; i < c.flux_grid.size(); ++i)
            os << detail::format_double(c.flux_grid[i]) << ','
               << detail::format_double(c.snr_db[i]) << ',' << to_string(c.kind)
               << ',' << c.label << '\n';
    }
}

/// Two-column flux/snr variant for direct gnuplot consumption.
inline void write_snr_gnuplot(const SnrCurve& c, std::ostream& os) {
    c.validate();
    os << "# flux_photons_per_s snr_db  (" << c.label << ")\n";
    for (std::size_t i = 0; i < c.flux_grid.size(); ++i)
        os << detail::format_double(c.flux_grid[i]) << ' '
           << detail::format_double(c.snr_db[i]) << '\n';
}

/// CSV rows: bin_left,bin_right,count; the overflow bucket gets an
/// open-ended right edge written as inf.
inline void write_histogram_csv(const Histogram& h, std::ostream& os) {
    os << "bin_left,bin_right,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        os << detail::format_double(h.bin_left(i)) << ','
           << detail::format_double(h.bin_right(i)) << ',' << h.counts[i] << '\n';
    if (h.overflow > 0)
        os << detail::format_double(h.bin_left(h.counts.size())) << ",inf,"
           << h.overflow << '\n';
}

}  // namespace ipspad::io
