// Block-averaged noise-reduction accounting and CSV output.

#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mcanc/types.hpp"

namespace mcanc {

/// 10 log10(pd / pe) with explicit infinities: pe == 0 gives +inf,
/// pd == 0 gives -inf, both zero gives 0 dB.
inline double noise_reduction_db(double dist_power, double err_power) {
    if (dist_power > 0.0 && err_power > 0.0) return 10.0 * std::log10(dist_power / err_power);
    if (dist_power > 0.0) return std::numeric_limits<double>::infinity();
    if (err_power > 0.0) return -std::numeric_limits<double>::infinity();
    return 0.0;
}

/// Per-block NR from powers summed over all error sensors. Each block holds
/// block_s * sample_rate samples; powers are per-sample means.
class NrSeries {
public:
    explicit NrSeries(double block_s = 1.0) : block_s_(block_s) {
        if (!(block_s > 0.0)) throw ConfigError("metrics.block_s must be > 0");
    }

    double block_s() const noexcept { return block_s_; }

    std::vector<double> nr_db;
    std::vector<double> err_power;
    std::vector<double> dist_power;
    /// nr_db_per_mic[block][m]
    std::vector<std::vector<double>> nr_db_per_mic;

    void accumulate(std::span<const double> d, std::span<const double> e, double sample_rate) {
        if (d.size() != e.size()) throw ShapeError("NrSeries::accumulate: d and e differ in channel count");
        if (block_samples_ == 0) {
            block_samples_ = static_cast<std::size_t>(std::llround(block_s_ * sample_rate));
            if (block_samples_ == 0) throw ConfigError("metrics.block_s shorter than one sample");
            mic_d_.assign(d.size(), 0.0);
            mic_e_.assign(d.size(), 0.0);
        } else if (d.size() != mic_d_.size()) {
            throw ShapeError("NrSeries::accumulate: channel count changed mid-run");
        }
        for (std::size_t m = 0; m < d.size(); ++m) {
            const double dd = d[m] * d[m];
            const double ee = e[m] * e[m];
            sum_d_ += dd;
            sum_e_ += ee;
            mic_d_[m] += dd;
            mic_e_[m] += ee;
        }
        if (++count_ == block_samples_) close_block();
    }

    /// Closes a trailing partial block, if any.
    void finish() {
        if (count_ > 0) close_block();
    }

    std::size_t blocks() const noexcept { return nr_db.size(); }

private:
    void close_block() {
        const double n = static_cast<double>(count_);
        const double pd = sum_d_ / n;
        const double pe = sum_e_ / n;
        dist_power.push_back(pd);
        err_power.push_back(pe);
        nr_db.push_back(noise_reduction_db(pd, pe));
        std::vector<double> per_mic(mic_d_.size());
        for (std::size_t m = 0; m < mic_d_.size(); ++m) {
            per_mic[m] = noise_reduction_db(mic_d_[m] / n, mic_e_[m] / n);
            mic_d_[m] = 0.0;
            mic_e_[m] = 0.0;
        }
        nr_db_per_mic.push_back(std::move(per_mic));
        sum_d_ = sum_e_ = 0.0;
        count_ = 0;
    }

    double block_s_;
    std::size_t block_samples_ = 0;
    std::size_t count_ = 0;
    double sum_d_ = 0.0;
    double sum_e_ = 0.0;
    std::vector<double> mic_d_;
    std::vector<double> mic_e_;
};

inline void accumulate(NrSeries& series, std::span<const double> d, std::span<const double> e, double sample_rate) {
    series.accumulate(d, e, sample_rate);
}

/// Per-sample error log, row-major n x M.
struct ErrorLog {
    std::size_t channels = 0;
    std::vector<double> samples;

    void append(std::span<const double> e) {
        if (channels == 0) channels = e.size();
        if (e.size() != channels) throw ShapeError("ErrorLog::append: channel count changed");
        samples.insert(samples.end(), e.begin(), e.end());
    }
    std::size_t rows() const noexcept { return channels == 0 ? 0 : samples.size() / channels; }
};

/// 17 significant digits; infinities as "inf" / "-inf".
inline std::string format_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Like format_real but keeps a ".0" on integral values ("1.0").
inline std::string format_seconds(double v) {
    std::string s = format_real(v);
    if (s.find_first_of(".eEin") == std::string::npos) s += ".0";
    return s;
}

inline double parse_real(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw FormatError("bad number in CSV: '" + s + "'");
    return v;
}

inline void write_errors_csv(std::ostream& sink, const ErrorLog& log, std::size_t channels) {
    sink << "n";
    for (std::size_t m = 1; m <= channels; ++m) sink << ",e_" << m;
    sink << '\n';
    for (std::size_t n = 0; n < log.rows(); ++n) {
        sink << n;
        for (std::size_t m = 0; m < log.channels; ++m) sink << ',' << format_real(log.samples[n * log.channels + m]);
        sink << '\n';
    }
    if (!sink) throw IoError("failed writing error CSV");
}

inline void write_nr_csv(std::ostream& sink, const NrSeries& series, bool per_mic = false) {
    const std::size_t mics = series.nr_db_per_mic.empty() ? 0 : series.nr_db_per_mic.front().size();
    sink << "block,seconds,nr_db,err_power,dist_power";
    if (per_mic) {
        for (std::size_t m = 1; m <= mics; ++m) sink << ",nr_db_" << m;
    }
    sink << '\n';
    for (std::size_t b = 0; b < series.blocks(); ++b) {
        sink << b << ',' << format_seconds(static_cast<double>(b + 1) * series.block_s()) << ','
             << format_real(series.nr_db[b]) << ',' << format_real(series.err_power[b]) << ','
             << format_real(series.dist_power[b]);
        if (per_mic) {
            for (double v : series.nr_db_per_mic[b]) sink << ',' << format_real(v);
        }
        sink << '\n';
    }
    if (!sink) throw IoError("failed writing NR CSV");
}

/// Both tables to one sink, separated by a blank line.
inline void emit_csv(std::ostream& sink, const NrSeries& series, const ErrorLog& errors, std::size_t channels,
                     bool per_mic = false) {
    write_errors_csv(sink, errors, channels);
    sink << '\n';
    write_nr_csv(sink, series, per_mic);
}

/// Rows of a parsed NR table.
struct NrTable {
    std::vector<std::size_t> block;
    std::vector<double> seconds;
    std::vector<double> nr_db;
    std::vector<double> err_power;
    std::vector<double> dist_power;
};

inline NrTable read_nr_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("block,seconds,nr_db,err_power,dist_power", 0) != 0) {
        throw FormatError("NR CSV: missing or bad header");
    }
    NrTable t;
    while (std::getline(in, line)) {
        if (line.empty()) break;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 5) throw FormatError("NR CSV: short row '" + line + "'");
        t.block.push_back(static_cast<std::size_t>(parse_real(cells[0])));
        t.seconds.push_back(parse_real(cells[1]));
        t.nr_db.push_back(parse_real(cells[2]));
        t.err_power.push_back(parse_real(cells[3]));
        t.dist_power.push_back(parse_real(cells[4]));
    }
    return t;
}

}  // namespace mcanc
