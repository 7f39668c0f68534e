// Synthetic plant: path impulse responses, noise sources and disturbance.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mcanc/coefficient_file.hpp"
#include "mcanc/fir.hpp"
#include "mcanc/types.hpp"

namespace mcanc {

using Stream = std::vector<double>;

enum class NoiseKind { Tone, BandLimited };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::BandLimited;
    double frequency = 500.0;  // tone only
    double f_low = 40.0;       // band_limited only
    double f_high = 1400.0;
    double amplitude = 1.0;    // peak for tones, RMS for band-limited noise
    std::uint64_t seed = 1;
    double duration_s = 1.0;
    double sample_rate = 16000.0;

    void validate() const {
        const double nyquist = sample_rate / 2.0;
        if (!(sample_rate > 0.0)) throw SpecError("noise.sample_rate must be > 0");
        if (!(duration_s > 0.0)) throw SpecError("noise.duration_s must be > 0");
        if (!std::isfinite(amplitude)) throw SpecError("noise.amplitude must be finite");
        if (kind == NoiseKind::Tone) {
            if (!(frequency > 0.0 && frequency < nyquist)) throw SpecError("noise.frequency must be in (0, fs/2)");
        } else if (!(f_low > 0.0 && f_low < f_high && f_high < nyquist)) {
            throw SpecError("noise band must satisfy 0 < f_low < f_high < fs/2");
        }
    }
};

enum class PathKind { Bandpass, Lowpass, RandomFir, FromFile };

struct PathSpec {
    PathKind kind = PathKind::Lowpass;
    double f_low = 50.0;    // bandpass
    double f_high = 2000.0;
    double f_cut = 2000.0;  // lowpass
    std::size_t len = 256;
    std::size_t inter_channel_delay = 0;
    /// Std-dev of a seeded per-entry gain 1 + jitter * N(0,1); 0 keeps every
    /// entry an exact delayed copy of the designed response.
    double gain_jitter = 0.0;
    std::uint64_t seed = 1;
    std::filesystem::path file;  // from_file
};

inline constexpr std::size_t kNoiseShapingTaps = 1025;

namespace detail {

inline double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

inline double hamming(std::size_t n, std::size_t len) {
    if (len == 1) return 1.0;
    return 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(len - 1));
}

/// Hamming-windowed sinc lowpass normalized to unit DC gain.
inline std::vector<double> windowed_sinc_lowpass(double f_cut, double sample_rate, std::size_t len) {
    const double fc = f_cut / sample_rate;
    const double centre = static_cast<double>(len - 1) / 2.0;
    std::vector<double> h(len);
    double sum = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
        h[n] = 2.0 * fc * sinc(2.0 * fc * (static_cast<double>(n) - centre)) * hamming(n, len);
        sum += h[n];
    }
    if (!(std::abs(sum) > 0.0)) throw SpecError("lowpass design has zero DC gain");
    for (double& v : h) v /= sum;
    return h;
}

}  // namespace detail

/// |H(f)| by direct DTFT evaluation.
inline double frequency_response(std::span<const double> h, double f, double sample_rate) {
    std::complex<double> acc{0.0, 0.0};
    const double omega = 2.0 * std::numbers::pi * f / sample_rate;
    for (std::size_t n = 0; n < h.size(); ++n) {
        acc += h[n] * std::polar(1.0, -omega * static_cast<double>(n));
    }
    return std::abs(acc);
}

/// Single impulse response of length spec.len.
///
/// lowpass: windowed sinc, unit DC gain. bandpass: difference of two
/// unit-DC lowpass designs, scaled to unit gain at sqrt(f_low * f_high).
/// random_fir: seeded Gaussian taps under an exponential envelope, unit
/// energy.
inline std::vector<double> design_fir(const PathSpec& spec, double sample_rate) {
    const double nyquist = sample_rate / 2.0;
    if (spec.len < 1) throw SpecError("path.len must be >= 1");
    switch (spec.kind) {
        case PathKind::Lowpass:
            if (!(spec.f_cut > 0.0 && spec.f_cut < nyquist)) throw SpecError("path.f_cut must be in (0, fs/2)");
            return detail::windowed_sinc_lowpass(spec.f_cut, sample_rate, spec.len);
        case PathKind::Bandpass: {
            if (!(spec.f_low > 0.0 && spec.f_low < spec.f_high && spec.f_high < nyquist)) {
                throw SpecError("path band must satisfy 0 < f_low < f_high < fs/2");
            }
            auto h = detail::windowed_sinc_lowpass(spec.f_high, sample_rate, spec.len);
            const auto lo = detail::windowed_sinc_lowpass(spec.f_low, sample_rate, spec.len);
            for (std::size_t n = 0; n < h.size(); ++n) h[n] -= lo[n];
            const double gain = frequency_response(h, std::sqrt(spec.f_low * spec.f_high), sample_rate);
            if (!(gain > 1e-6)) throw SpecError("bandpass too short to realize the requested band");
            for (double& v : h) v /= gain;
            return h;
        }
        case PathKind::RandomFir: {
            std::mt19937_64 rng(spec.seed);
            std::normal_distribution<double> normal(0.0, 1.0);
            const double tau = std::max(1.0, static_cast<double>(spec.len) / 4.0);
            std::vector<double> h(spec.len);
            double energy = 0.0;
            for (std::size_t n = 0; n < spec.len; ++n) {
                h[n] = normal(rng) * std::exp(-static_cast<double>(n) / tau);
                energy += h[n] * h[n];
            }
            const double scale = energy > 0.0 ? 1.0 / std::sqrt(energy) : 1.0;
            for (double& v : h) v *= scale;
            return h;
        }
        case PathKind::FromFile:
            throw SpecError("from_file paths are loaded as a whole matrix, not designed");
    }
    throw SpecError("unknown path kind");
}

/// rows x cols bank where entry (r, c) is the designed response delayed
/// by inter_channel_delay * (r + c) samples and truncated to len.
inline PathMatrix build_path_matrix(const PathSpec& spec, std::size_t rows, std::size_t cols, double sample_rate) {
    if (rows < 1 || cols < 1) throw SpecError("path matrix needs rows, cols >= 1");
    if (spec.kind == PathKind::FromFile) {
        auto p = load_path_matrix(spec.file);
        if (p.rows() != rows || p.cols() != cols || p.len() != spec.len) {
            throw SpecError("path file " + spec.file.string() + " is " + std::to_string(p.rows()) + "x" +
                            std::to_string(p.cols()) + "x" + std::to_string(p.len()) + ", expected " +
                            std::to_string(rows) + "x" + std::to_string(cols) + "x" + std::to_string(spec.len));
        }
        return p;
    }
    if (spec.inter_channel_delay * (rows + cols) >= spec.len && spec.inter_channel_delay > 0) {
        throw SpecError("path.inter_channel_delay * (rows + cols) must be < len");
    }
    if (!(spec.gain_jitter >= 0.0)) throw SpecError("path.gain_jitter must be >= 0");
    const auto base = design_fir(spec, sample_rate);

    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor3 taps(rows, cols, spec.len);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double gain = spec.gain_jitter > 0.0 ? 1.0 + spec.gain_jitter * normal(rng) : 1.0;
            const std::size_t shift = spec.inter_channel_delay * (r + c);
            auto out = taps.row(r, c);
            for (std::size_t n = shift; n < spec.len; ++n) out[n] = gain * base[n - shift];
        }
    }
    return PathMatrix(std::move(taps));
}

inline std::size_t sample_count(double duration_s, double sample_rate) {
    return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
}

/// Tone: a sin(2 pi f n / fs). Band-limited: seeded white Gaussian noise
/// through a bandpass over [f_low, f_high], scaled to RMS = amplitude.
inline Stream generate_noise(const NoiseSpec& spec) {
    spec.validate();
    const std::size_t count = sample_count(spec.duration_s, spec.sample_rate);
    Stream out(count);
    if (spec.kind == NoiseKind::Tone) {
        const double omega = 2.0 * std::numbers::pi * spec.frequency / spec.sample_rate;
        for (std::size_t n = 0; n < count; ++n) out[n] = spec.amplitude * std::sin(omega * static_cast<double>(n));
        return out;
    }

    PathSpec shaping;
    shaping.kind = PathKind::Bandpass;
    shaping.f_low = spec.f_low;
    shaping.f_high = spec.f_high;
    shaping.len = kNoiseShapingTaps;
    const auto h = design_fir(shaping, spec.sample_rate);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Extra leading samples so the output starts in steady state.
    std::vector<double> white(count + h.size() - 1);
    for (double& v : white) v = normal(rng);

    double energy = 0.0;
    for (std::size_t n = 0; n < count; ++n) {
        double acc = 0.0;
        const std::size_t newest = n + h.size() - 1;
        for (std::size_t t = 0; t < h.size(); ++t) acc += h[t] * white[newest - t];
        out[n] = acc;
        energy += acc * acc;
    }
    const double rms = std::sqrt(energy / static_cast<double>(count));
    if (rms > 0.0) {
        const double scale = spec.amplitude / rms;
        for (double& v : out) v *= scale;
    }
    return out;
}

/// d_m(n) = sum_j sum_t p_mj[t] x_j(n - t) for every sensor m.
inline std::vector<Stream> synthesize_disturbance(const PathMatrix& primary, const std::vector<Stream>& refs) {
    if (refs.size() != primary.cols()) {
        throw ShapeError("synthesize_disturbance: primary path has " + std::to_string(primary.cols()) +
                         " reference columns, got " + std::to_string(refs.size()) + " streams");
    }
    const std::size_t count = refs.front().size();
    for (const auto& r : refs) {
        if (r.size() != count) throw ShapeError("synthesize_disturbance: reference streams differ in length");
    }
    DelayLineBank history(primary.cols(), primary.len());
    std::vector<Stream> d(primary.rows(), Stream(count));
    MultiChannelFrame frame(primary.cols());
    for (std::size_t n = 0; n < count; ++n) {
        for (std::size_t j = 0; j < refs.size(); ++j) frame[j] = refs[j][n];
        history.push(frame);
        const auto out = compute_antinoise_frame(primary, history);
        for (std::size_t m = 0; m < out.size(); ++m) d[m][n] = out[m];
    }
    return d;
}

}  // namespace mcanc
